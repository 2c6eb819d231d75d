#include "wtcvae/cvae.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numeric>
#include <random>

#include "wtcvae/fft.hpp"
#include "wtcvae/wavetable.hpp"

namespace wtcvae {

void ModelConfig::validate() const {
  const bool sizes_ok = !encoder_channels.empty() && encoder_channels.size() == encoder_strides.size() &&
                        decoder_channels.size() == upsample_factors.size() && !decoder_channels.empty() &&
                        decoder_channels.back() == 1 && latent_dim > 0 && label_dim > 0 && kernel_size % 2 == 1;
  if (!sizes_ok) throw Error("invalid model config: inconsistent channel/stride plans");
  std::size_t len = table_length;
  for (const std::size_t s : encoder_strides) {
    if (s == 0 || len % s != 0) throw Error("invalid model config: strides do not divide the table length");
    len /= s;
  }
  std::size_t up = len;
  for (const std::size_t f : upsample_factors) up *= f;
  if (up != table_length) throw Error("invalid model config: decoder does not return to the table length");
}

std::size_t ModelConfig::bottleneck_length() const {
  std::size_t len = table_length;
  for (const std::size_t s : encoder_strides) len /= s;
  return len;
}

void BetaSchedule::validate() const {
  if (!(beta_min > 0.0 && beta_min <= beta_max && warmup_epochs >= 1.0)) {
    throw Error("invalid beta schedule: need 0 < beta_min <= beta_max and warmup >= 1");
  }
}

double beta_at(double epoch, const BetaSchedule& s) {
  if (epoch > s.warmup_epochs) return s.beta_max;
  if (s.beta_min == s.beta_max) return s.beta_max;
  if (epoch <= 0.0) return s.beta_min;
  const double t = epoch / s.warmup_epochs;
  const double b = std::exp(t * (std::log(s.beta_max) - std::log(s.beta_min)) + std::log(s.beta_min));
  // exp(log(x)) is not exactly x; clamping keeps both endpoints exact and the
  // schedule monotone across e = w.
  return std::clamp(b, s.beta_min, s.beta_max);
}

double spectral_distance(const Spectrum& ref, const Spectrum& cand) {
  if (ref.magnitudes.size() != cand.magnitudes.size()) throw Error("spectral_distance: spectrum sizes differ");
  double diff2 = 0.0, ref2 = 0.0, l1 = 0.0;
  for (std::size_t k = 0; k < ref.magnitudes.size(); ++k) {
    const double d = ref.magnitudes[k] - cand.magnitudes[k];
    diff2 += d * d;
    ref2 += ref.magnitudes[k] * ref.magnitudes[k];
    l1 += std::abs(d);
  }
  if (!(ref2 > 0.0)) throw Error("spectral_distance: silent reference table");
  return std::sqrt(diff2) / std::sqrt(ref2) + std::log(l1 + kSpectralEps);
}

double spectral_distance(std::span<const float> reference, std::span<const float> candidate) {
  return spectral_distance(table_spectrum(reference, Window::rect), table_spectrum(candidate, Window::rect));
}

double kl_divergence(std::span<const double> mu, std::span<const double> logvar) {
  if (mu.size() != logvar.size()) throw Error("kl_divergence: size mismatch");
  double acc = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) acc += mu[j] * mu[j] + std::exp(logvar[j]) - logvar[j] - 1.0;
  return 0.5 * acc;
}

template <class T>
Cvae<T>::Cvae(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::size_t k = config_.kernel_size;
  std::size_t cin = 1 + config_.label_dim;
  for (std::size_t i = 0; i < config_.encoder_channels.size(); ++i) {
    const std::size_t cout = config_.encoder_channels[i];
    const std::string base = "enc.conv" + std::to_string(i);
    add_param(base + ".weight", {cout, cin, k}, cin * k);
    add_param(base + ".bias", {cout, 1, 1}, cin * k);
    cin = cout;
  }
  const std::size_t flat = cin * config_.bottleneck_length();
  add_param("enc.mu.weight", {config_.latent_dim, flat, 1}, flat);
  add_param("enc.mu.bias", {config_.latent_dim, 1, 1}, flat);
  add_param("enc.logvar.weight", {config_.latent_dim, flat, 1}, flat);
  add_param("enc.logvar.bias", {config_.latent_dim, 1, 1}, flat);

  decoder_first_ = params_.size();
  const std::size_t zin = config_.latent_dim + config_.label_dim;
  add_param("dec.input.weight", {flat, zin, 1}, zin);
  add_param("dec.input.bias", {flat, 1, 1}, zin);
  for (std::size_t i = 0; i < config_.decoder_channels.size(); ++i) {
    const std::size_t cout = config_.decoder_channels[i];
    const std::string base = "dec.block" + std::to_string(i);
    add_param(base + ".conv.weight", {cout, cin, k}, cin * k);
    add_param(base + ".conv.bias", {cout, 1, 1}, cin * k);
    add_param(base + ".skip.weight", {cout, cin, 1}, cin);
    add_param(base + ".skip.bias", {cout, 1, 1}, cin);
    cin = cout;
  }
}

template <class T>
void Cvae<T>::add_param(std::string name, ad::Shape shape, std::size_t fan_in) {
  params_.emplace_back(std::move(name), shape);
  fan_in_.push_back(fan_in);
}

template <class T>
void Cvae<T>::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in_[i]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (T& v : params_[i].value.values) v = static_cast<T>(dist(rng));
    params_[i].zero_grad();
  }
}

template <class T>
std::size_t Cvae<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <class T>
void Cvae<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template <class T>
typename Cvae<T>::Posterior Cvae<T>::encode(ad::Tape<T>& tape, const ad::Tensor<T>& tables,
                                            const ad::Tensor<T>& labels) {
  const std::size_t batch = tables.shape.d1, len = tables.shape.d2;
  if (tables.shape.d0 != 1 || len != config_.table_length) {
    throw ad::ShapeError("encode: tables must be (1, B, " + std::to_string(config_.table_length) + "), got " +
                         ad::to_string(tables.shape));
  }
  if (labels.shape != ad::Shape{config_.label_dim, batch, 1}) {
    throw ad::ShapeError("encode: labels must be (3, B, 1), got " + ad::to_string(labels.shape));
  }
  ad::Tensor<T> input(ad::Shape{1 + config_.label_dim, batch, len});
  std::copy(tables.values.begin(), tables.values.end(), input.values.begin());
  for (std::size_t c = 0; c < config_.label_dim; ++c) {
    for (std::size_t b = 0; b < batch; ++b) {
      std::fill_n(&input.at(1 + c, b, 0), len, labels.at(c, b, 0));
    }
  }
  const std::size_t pad = (config_.kernel_size - 1) / 2;
  ad::Var<T> h = tape.constant(std::move(input));
  std::size_t p = 0;
  for (std::size_t i = 0; i < config_.encoder_channels.size(); ++i, p += 2) {
    h = ad::leaky_relu(ad::conv1d(h, param(tape, p), param(tape, p + 1), config_.encoder_strides[i], pad));
  }
  const ad::Var<T> flat = ad::flatten(h);
  const ad::Var<T> mu = ad::dense(flat, param(tape, p), param(tape, p + 1));
  const ad::Var<T> logvar = ad::dense(flat, param(tape, p + 2), param(tape, p + 3));
  return {mu, logvar};
}

template <class T>
ad::Var<T> Cvae<T>::decode(ad::Tape<T>& tape, ad::Var<T> z, const ad::Tensor<T>& labels) {
  const std::size_t batch = z.shape().d1;
  if (z.shape() != ad::Shape{config_.latent_dim, batch, 1}) {
    throw ad::ShapeError("decode: z must be (latent, B, 1), got " + ad::to_string(z.shape()));
  }
  if (labels.shape != ad::Shape{config_.label_dim, batch, 1}) {
    throw ad::ShapeError("decode: labels must be (3, B, 1), got " + ad::to_string(labels.shape));
  }
  const std::size_t pad = (config_.kernel_size - 1) / 2;
  std::size_t p = decoder_first_;
  const ad::Var<T> zc = ad::concat_channels(z, tape.constant(labels));
  ad::Var<T> h = ad::leaky_relu(ad::dense(zc, param(tape, p), param(tape, p + 1)));
  p += 2;
  h = ad::unflatten(h, config_.encoder_channels.back(), config_.bottleneck_length());
  const std::size_t blocks = config_.decoder_channels.size();
  for (std::size_t i = 0; i < blocks; ++i, p += 4) {
    const std::size_t f = config_.upsample_factors[i];
    const ad::Var<T> y = ad::add(ad::conv1d_upsampled(h, param(tape, p), param(tape, p + 1), f, pad),
                                 ad::conv1d_upsampled(h, param(tape, p + 2), param(tape, p + 3), f, 0));
    h = ad::activation(y, i + 1 == blocks ? ad::Activation::tanh : ad::Activation::leaky_relu);
  }
  return h;
}

template <class T>
LatentCode Cvae<T>::encode_table(std::span<const float> table, const SemanticLabels& labels) {
  const std::span<const float> one[] = {table};
  const SemanticLabels lab[] = {labels};
  ad::Tape<T> tape;
  const Posterior post = encode(tape, table_batch<T>(one), label_batch<T>(lab));
  LatentCode code;
  code.mu.assign(post.mu.value().values.begin(), post.mu.value().values.end());
  code.logvar.assign(post.logvar.value().values.begin(), post.logvar.value().values.end());
  code.z = code.mu;
  return code;
}

template <class T>
std::vector<float> Cvae<T>::decode_latent(std::span<const double> z, const SemanticLabels& labels) {
  if (z.size() != config_.latent_dim) throw Error("decode_latent: wrong latent size");
  const SemanticLabels lab[] = {labels};
  ad::Tape<T> tape;
  ad::Tensor<T> zt(ad::Shape{config_.latent_dim, 1, 1});
  for (std::size_t j = 0; j < z.size(); ++j) zt.values[j] = static_cast<T>(z[j]);
  const ad::Var<T> out = decode(tape, tape.constant(std::move(zt)), label_batch<T>(lab));
  return {out.value().values.begin(), out.value().values.end()};
}

template <class T>
std::vector<float> Cvae<T>::regenerate(std::span<const float> table, const SemanticLabels& own,
                                       const SemanticLabels& target) {
  const LatentCode code = encode_table(table, own);
  return decode_latent(code.mu, target);
}

template <class T>
std::vector<float> Cvae<T>::to_blob() const {
  std::vector<float> blob;
  blob.reserve(parameter_count());
  for (const auto& p : params_) {
    for (const T v : p.value.values) blob.push_back(static_cast<float>(v));
  }
  return blob;
}

template <class T>
void Cvae<T>::from_blob(std::span<const float> blob) {
  if (blob.size() != parameter_count()) {
    throw Error("parameter blob has " + std::to_string(blob.size()) + " values, model needs " +
                std::to_string(parameter_count()));
  }
  std::size_t i = 0;
  for (auto& p : params_) {
    for (T& v : p.value.values) v = static_cast<T>(blob[i++]);
    p.zero_grad();
  }
}

template class Cvae<float>;
template class Cvae<double>;

template <class T>
ad::Tensor<T> table_batch(std::span<const std::span<const float>> tables) {
  const std::size_t batch = tables.size();
  const std::size_t len = batch == 0 ? kTableLength : tables.front().size();
  ad::Tensor<T> out(ad::Shape{1, batch, len});
  for (std::size_t b = 0; b < batch; ++b) {
    if (tables[b].size() != len) throw ad::ShapeError("table_batch: tables differ in length");
    std::copy(tables[b].begin(), tables[b].end(), out.values.begin() + b * len);
  }
  return out;
}

template <class T>
ad::Tensor<T> label_batch(std::span<const SemanticLabels> labels) {
  const std::size_t batch = labels.size();
  ad::Tensor<T> out(ad::Shape{3, batch, 1});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < 3; ++c) out.at(c, b, 0) = static_cast<T>(labels[b][c]);
  }
  return out;
}

template <class T>
ad::Var<T> reparameterize(ad::Var<T> mu, ad::Var<T> logvar, const ad::Tensor<T>& noise) {
  if (noise.shape != mu.shape() || logvar.shape() != mu.shape()) {
    throw ad::ShapeError("reparameterize: mu, logvar and noise shapes differ");
  }
  ad::Tape<T>& tape = *mu.tape;
  const ad::Var<T> sigma = ad::exp(ad::scale(logvar, T(0.5)));
  return ad::add(mu, ad::mul(sigma, tape.constant(noise)));
}

template <class T>
ad::Var<T> kl_divergence(ad::Var<T> mu, ad::Var<T> logvar) {
  if (mu.shape() != logvar.shape()) throw ad::ShapeError("kl_divergence: mu/logvar shape mismatch");
  const auto& m = mu.value().values;
  const auto& lv = logvar.value().values;
  const std::size_t batch = mu.shape().d1;
  double acc = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double a = m[i], v = lv[i];
    acc += a * a + std::exp(v) - v - 1.0;
  }
  const double value = 0.5 * acc / static_cast<double>(batch);
  const std::size_t mi = mu.id, li = logvar.id;
  return mu.tape->record(
      ad::Tensor<T>(ad::Shape{1, 1, 1}, static_cast<T>(value)), {mi, li},
      [=](ad::Tape<T>& tape, std::size_t self) {
        const double g = static_cast<double>(tape.grad(self).values[0]) / static_cast<double>(batch);
        if (tape.needs_grad(mi)) {
          const auto& mv = tape.value(mi).values;
          auto& gm = tape.grad(mi).values;
          for (std::size_t i = 0; i < gm.size(); ++i) gm[i] += static_cast<T>(g * mv[i]);
        }
        if (tape.needs_grad(li)) {
          const auto& lvv = tape.value(li).values;
          auto& gl = tape.grad(li).values;
          for (std::size_t i = 0; i < gl.size(); ++i) gl[i] += static_cast<T>(g * 0.5 * (std::exp(static_cast<double>(lvv[i])) - 1.0));
        }
      },
      "kl_divergence");
}

// A k-fold repetition of a length-L cycle has a kL-point spectrum that is zero
// except at bins k*m, where it equals k * X_L[m]. Working on the L-point
// transform gives the same distance at a sixth of the FFT size.
template <class T>
ad::Var<T> spectral_distance(ad::Var<T> output, const ad::Tensor<T>& reference) {
  const ad::Shape s = output.shape();
  if (s.d0 != 1 || reference.shape != s) {
    throw ad::ShapeError("spectral_distance: output " + ad::to_string(s) + " vs reference " +
                         ad::to_string(reference.shape));
  }
  const std::size_t batch = s.d1, len = s.d2;
  const double reps = static_cast<double>(kConcatCycles);
  const bool want_grad = output.tape->needs_grad(output.id);
  const auto& out = output.value().values;
  // d(item distance)/d(output sample), filled only when a gradient is needed.
  auto local = std::make_shared<std::vector<double>>(want_grad ? batch * len : 0, 0.0);
  double total = 0.0;

  std::vector<double> cycle(len);
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(reference.values.begin() + b * len, len, cycle.begin());
    const auto ref_bins = fft::rfft(cycle);
    std::copy_n(out.begin() + b * len, len, cycle.begin());
    const auto out_bins = fft::rfft(cycle);

    const std::size_t nb = ref_bins.size();
    std::vector<double> diff(nb);
    double diff2 = 0.0, ref2 = 0.0, l1 = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
      const double r = reps * std::abs(ref_bins[k]);
      diff[k] = reps * std::abs(out_bins[k]) - r;
      diff2 += diff[k] * diff[k];
      ref2 += r * r;
      l1 += std::abs(diff[k]);
    }
    if (!(ref2 > 0.0)) throw Error("spectral_distance: silent reference table in batch item " + std::to_string(b));
    const double fro = std::sqrt(diff2), ref_norm = std::sqrt(ref2);
    total += fro / ref_norm + std::log(l1 + kSpectralEps);

    if (!want_grad) continue;
    // dd/dS_k, then through S_k = reps * |X_k| back to the samples with an
    // inverse transform. Interior bins stand for a conjugate pair, which the
    // inverse transform counts twice.
    std::vector<std::complex<double>> u(nb);
    for (std::size_t k = 0; k < nb; ++k) {
      const double mag = std::abs(out_bins[k]);
      if (mag == 0.0) continue;
      double g = (diff[k] > 0.0 ? 1.0 : (diff[k] < 0.0 ? -1.0 : 0.0)) / (l1 + kSpectralEps);
      if (fro > 0.0) g += diff[k] / (fro * ref_norm);
      const bool edge = k == 0 || (len % 2 == 0 && k == nb - 1);
      u[k] = out_bins[k] / mag * (g * reps * (edge ? 1.0 : 0.5));
    }
    const std::vector<double> dy = fft::irfft(u, len);
    std::copy(dy.begin(), dy.end(), local->begin() + b * len);
  }

  const double value = total / static_cast<double>(batch);
  const std::size_t oi = output.id;
  return output.tape->record(
      ad::Tensor<T>(ad::Shape{1, 1, 1}, static_cast<T>(value)), {oi},
      [=](ad::Tape<T>& tape, std::size_t self) {
        const double g = static_cast<double>(tape.grad(self).values[0]) / static_cast<double>(batch);
        auto& go = tape.grad(oi).values;
        for (std::size_t i = 0; i < go.size(); ++i) go[i] += static_cast<T>(g * (*local)[i]);
      },
      "spectral_distance");
}

template <class T>
LossGraph<T> total_loss(Cvae<T>& model, ad::Tape<T>& tape, const ad::Tensor<T>& tables, const ad::Tensor<T>& labels,
                        const ad::Tensor<T>& noise, double beta) {
  const auto post = model.encode(tape, tables, labels);
  const ad::Var<T> z = reparameterize(post.mu, post.logvar, noise);
  const ad::Var<T> out = model.decode(tape, z, labels);
  LossGraph<T> g;
  g.reconstruction = spectral_distance(out, tables);
  g.kl = kl_divergence(post.mu, post.logvar);
  g.total = ad::add(g.reconstruction, ad::scale(g.kl, static_cast<T>(beta)));
  g.breakdown.reconstruction = static_cast<double>(g.reconstruction.value().values[0]);
  g.breakdown.kl = static_cast<double>(g.kl.value().values[0]);
  g.breakdown.beta = beta;
  g.breakdown.total = g.breakdown.reconstruction + beta * g.breakdown.kl;
  return g;
}

#define WTCVAE_INSTANTIATE(T)                                                                          \
  template ad::Tensor<T> table_batch<T>(std::span<const std::span<const float>>);                     \
  template ad::Tensor<T> label_batch<T>(std::span<const SemanticLabels>);                             \
  template ad::Var<T> reparameterize(ad::Var<T>, ad::Var<T>, const ad::Tensor<T>&);                   \
  template ad::Var<T> kl_divergence(ad::Var<T>, ad::Var<T>);                                          \
  template ad::Var<T> spectral_distance(ad::Var<T>, const ad::Tensor<T>&);                            \
  template LossGraph<T> total_loss(Cvae<T>&, ad::Tape<T>&, const ad::Tensor<T>&, const ad::Tensor<T>&, \
                                   const ad::Tensor<T>&, double);

WTCVAE_INSTANTIATE(float)
WTCVAE_INSTANTIATE(double)

#undef WTCVAE_INSTANTIATE

}  // namespace wtcvae
