#include "wtcvae/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace wtcvae {

template <class T>
Adam<T>::Adam(std::span<const ad::Parameter<T>> params, AdamConfig config) : config_(config) {
  for (const auto& p : params) {
    m_.emplace_back(p.value.size(), T(0));
    v_.emplace_back(p.value.size(), T(0));
  }
}

template <class T>
void Adam<T>::step(std::span<ad::Parameter<T>> params) {
  if (params.size() != m_.size()) throw Error("adam: parameter list changed since construction");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].grad.size() != m_[i].size()) throw ad::ShapeError("adam: shape of " + params[i].name + " changed");
    for (const T g : params[i].grad.values) {
      if (!std::isfinite(g)) throw ad::NonFiniteError("adam: non-finite gradient in " + params[i].name);
    }
  }
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const T lr = static_cast<T>(config_.lr), eps = static_cast<T>(config_.eps);
  const T one_b1 = static_cast<T>(1.0 - b1), one_b2 = static_cast<T>(1.0 - b2);
  const T tb1 = static_cast<T>(b1), tb2 = static_cast<T>(b2);
  const T inv_c1 = static_cast<T>(1.0 / c1), inv_c2 = static_cast<T>(1.0 / c2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i].value.values.data();
    const T* g = params[i].grad.values.data();
    T* m = m_[i].data();
    T* v = v_[i].data();
    for (std::size_t j = 0, n = m_[i].size(); j < n; ++j) {
      m[j] = tb1 * m[j] + one_b1 * g[j];
      v[j] = tb2 * v[j] + one_b2 * g[j] * g[j];
      p[j] -= lr * (m[j] * inv_c1) / (std::sqrt(v[j] * inv_c2) + eps);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

void TrainConfig::apply_desk_scale() {
  train_subset = 512;
  epochs = 2000;
  // Warm-up over the same first third of training as the full-length schedule.
  schedule.warmup_epochs = 2000.0 / 3.0;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error("train config: batch_size must be >= 1");
  schedule.validate();
  model.validate();
}

std::string metrics_csv(std::span<const EpochMetrics> rows) {
  std::ostringstream out;
  out << "epoch,beta,train_recon,train_kl,val_recon,val_kl\n";
  out.precision(17);
  for (const EpochMetrics& r : rows) {
    out << r.epoch << ',' << r.beta << ',' << r.train_recon << ',' << r.train_kl << ',';
    if (!std::isnan(r.val_recon)) out << r.val_recon;
    out << ',';
    if (!std::isnan(r.val_kl)) out << r.val_kl;
    out << '\n';
  }
  return out.str();
}

namespace {

struct Batch {
  ad::Tensor<float> tables;
  ad::Tensor<float> labels;
};

Batch gather(const StoredDataset& data, std::span<const std::size_t> idx) {
  std::vector<std::span<const float>> tables;
  std::vector<SemanticLabels> labels;
  tables.reserve(idx.size());
  for (const std::size_t i : idx) {
    tables.emplace_back(data.dataset.tables[i].samples);
    labels.push_back(data.labels[i]);
  }
  return {table_batch<float>(tables), label_batch<float>(labels)};
}

std::string describe_batch(const StoredDataset& data, std::span<const std::size_t> idx) {
  std::string s = "source ids [";
  for (std::size_t k = 0; k < idx.size(); ++k) {
    s += (k ? "," : "") + std::to_string(data.dataset.tables[idx[k]].source_id);
  }
  return s + "]";
}

Checkpoint snapshot(const Cvae<float>& model, const TrainConfig& cfg, const StoredDataset& data,
                    std::span<const EpochMetrics> rows) {
  Checkpoint c = make_checkpoint(model, cfg.schedule, data.stats);
  c.split_seed = data.dataset.shuffle_seed;
  c.train_seed = cfg.seed;
  c.epochs_completed = rows.size();
  c.metrics_digest = fnv1a_hex(metrics_csv(rows));
  return c;
}

void write_outputs(const Checkpoint& c, const TrainConfig& cfg, std::span<const EpochMetrics> rows) {
  if (!cfg.checkpoint.empty()) save_checkpoint(c, cfg.checkpoint);
  if (!cfg.metrics.empty()) write_file_atomic(cfg.metrics, metrics_csv(rows));
}

// Every step allocates and frees the same few-hundred-KB activation buffers.
// With glibc defaults those come from fresh mmap pages, and the page faults
// cost about a quarter of the step time.
void keep_heap_warm() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
    return true;
  }();
  (void)done;
#endif
}

}  // namespace

ValidationLoss validation_loss(Cvae<float>& model, const StoredDataset& data, std::span<const std::size_t> indices,
                               std::size_t batch_size) {
  ValidationLoss out;
  if (indices.empty()) return out;
  for (std::size_t b0 = 0; b0 < indices.size(); b0 += batch_size) {
    const auto idx = indices.subspan(b0, std::min(batch_size, indices.size() - b0));
    const Batch batch = gather(data, idx);
    const ad::Tensor<float> zero(ad::Shape{model.config().latent_dim, idx.size(), 1});
    ad::Tape<float> tape(false);
    const auto g = total_loss(model, tape, batch.tables, batch.labels, zero, 0.0);
    out.recon += g.breakdown.reconstruction * static_cast<double>(idx.size());
    out.kl += g.breakdown.kl * static_cast<double>(idx.size());
  }
  out.recon /= static_cast<double>(indices.size());
  out.kl /= static_cast<double>(indices.size());
  return out;
}

TrainResult train(const TrainConfig& cfg, const StoredDataset& data, const EpochCallback& on_epoch) {
  cfg.validate();
  keep_heap_warm();
  const auto started = std::chrono::steady_clock::now();
  std::vector<std::size_t> train_idx = data.dataset.indices(Split::train);
  if (cfg.train_subset > 0 && train_idx.size() > cfg.train_subset) train_idx.resize(cfg.train_subset);
  if (train_idx.empty()) throw Error("train: the training split is empty");
  const std::vector<std::size_t> val_idx = data.dataset.indices(Split::val);

  Cvae<float> model(cfg.model);
  model.initialize(cfg.seed);
  Adam<float> adam(model.parameters(), cfg.adam);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::normal_distribution<double> gauss;

  TrainResult result;
  std::vector<std::size_t> order = train_idx;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochMetrics row;
    row.epoch = epoch;
    row.beta = beta_at(static_cast<double>(epoch), cfg.schedule);
    std::shuffle(order.begin(), order.end(), rng);
    double recon = 0.0, kl = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const auto idx = std::span<const std::size_t>(order).subspan(b0, std::min(cfg.batch_size, order.size() - b0));
      const Batch batch = gather(data, idx);
      ad::Tensor<float> noise(ad::Shape{cfg.model.latent_dim, idx.size(), 1});
      for (float& v : noise.values) v = static_cast<float>(gauss(rng));
      model.zero_grad();
      try {
        ad::Tape<float> tape(false);
        const auto g = total_loss(model, tape, batch.tables, batch.labels, noise, row.beta);
        if (!std::isfinite(g.breakdown.total)) throw ad::NonFiniteError("loss is not finite");
        tape.backward(g.total);
        adam.step(model.parameters());
        recon += g.breakdown.reconstruction * static_cast<double>(idx.size());
        kl += g.breakdown.kl * static_cast<double>(idx.size());
      } catch (const ad::NonFiniteError& e) {
        throw ad::NonFiniteError("training aborted at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(b0 / cfg.batch_size) + " (" + describe_batch(data, idx) +
                                 "): " + e.what());
      }
    }
    row.train_recon = recon / static_cast<double>(order.size());
    row.train_kl = kl / static_cast<double>(order.size());
    const bool last = epoch + 1 == cfg.epochs;
    if (!val_idx.empty() && cfg.val_every > 0 && ((epoch + 1) % cfg.val_every == 0 || last)) {
      const ValidationLoss v = validation_loss(model, data, val_idx, cfg.batch_size);
      row.val_recon = v.recon;
      row.val_kl = v.kl;
    }
    result.metrics.push_back(row);
    const bool stop = on_epoch && !on_epoch(row);
    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 && !last && !stop) {
      write_outputs(snapshot(model, cfg, data, result.metrics), cfg, result.metrics);
    }
    if (stop) break;
  }
  result.checkpoint = snapshot(model, cfg, data, result.metrics);
  write_outputs(result.checkpoint, cfg, result.metrics);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

TrainResult train(const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (cfg.dataset.empty()) throw Error("train: no dataset manifest given");
  return train(cfg, load_dataset(cfg.dataset), on_epoch);
}

}  // namespace wtcvae
