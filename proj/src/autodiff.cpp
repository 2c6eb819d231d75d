#include "wtcvae/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "wtcvae/simd/kernels.hpp"

namespace wtcvae::ad {

std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.d0) + ", " + std::to_string(s.d1) + ", " + std::to_string(s.d2) +
         ")";
}

template <class T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

template <class T>
Var<T> Tape<T>::parameter(Parameter<T>& p) {
  Node n;
  n.value = p.value;
  n.param = &p;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

template <class T>
Var<T> Tape<T>::record(Tensor<T> value, std::initializer_list<std::size_t> parents,
                       Backward backward, const char* op_name) {
  if (differentiated_) throw TapeError("tape already differentiated; start a new forward pass");
  if (check_finite_) {
    for (const T v : value.values) {
      if (!std::isfinite(v)) throw NonFiniteError(std::string("non-finite value produced by ") + op_name);
    }
  }
  Node n;
  n.value = std::move(value);
  for (const std::size_t p : parents) n.needs_grad = n.needs_grad || nodes_[p].needs_grad;
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

template <class T>
Tensor<T>& Tape<T>::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.values.empty()) n.grad = Tensor<T>(n.value.shape);
  return n.grad;
}

template <class T>
void Tape<T>::backward(Var<T> loss) {
  if (loss.tape != this) throw TapeError("loss belongs to a different tape");
  if (differentiated_) throw TapeError("backward called twice on the same forward trace");
  if (value(loss.id).size() != 1) throw ShapeError("backward needs a scalar loss");
  differentiated_ = true;
  grad(loss.id).values[0] = T(1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.values.empty()) continue;
    if (n.param != nullptr) {
      auto& pg = n.param->grad.values;
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad.values[k];
    } else if (n.backward) {
      n.backward(*this, i);
    }
  }
}

template class Tape<float>;
template class Tape<double>;

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

template <class T>
std::vector<const T*> row_pointers(const T* base, std::size_t rows, std::size_t stride) {
  std::vector<const T*> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = base + r * stride;
  return out;
}

// Unary op whose derivative is a function of its own output.
template <class T, class D>
Var<T> elementwise_from_output(Var<T> x, Tensor<T> out, D dydx, const char* name) {
  const std::size_t xi = x.id;
  return x.tape->record(
      std::move(out), {xi},
      [xi, dydx](Tape<T>& tape, std::size_t self) {
        const T* __restrict y = tape.value(self).values.data();
        const T* __restrict gy = tape.grad(self).values.data();
        T* __restrict gx = tape.grad(xi).values.data();
        const D f = dydx;
        for (std::size_t i = 0, n = tape.value(self).size(); i < n; ++i) {
          const T d = f(y[i]);
          gx[i] += gy[i] * d;
        }
      },
      name);
}

}  // namespace

namespace {

std::ptrdiff_t floor_div(std::ptrdiff_t a, std::ptrdiff_t b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

// Output t = factor * s + r of a convolution over a nearest-upsampled input
// reads low-rate samples s + floor((r + k - pad) / factor) for taps k. Taps
// landing on the same sample are merged, so phase r needs only `taps[r]`
// weights per (out, in) pair.
struct PhasePlan {
  std::size_t factor = 1;
  std::vector<std::size_t> first;    // pad_lo + floor((r - pad) / factor), >= 0
  std::vector<std::size_t> taps;     // merged taps per phase
  std::vector<std::size_t> outputs;  // outputs per item in phase r
  std::vector<std::size_t> tap_of;   // [r * K + k] -> merged tap index
  std::size_t pad_lo = 0;
  std::size_t period = 0;            // padded low-rate length per item
};

PhasePlan plan_phases(std::size_t factor, std::size_t len, std::size_t ksize, std::size_t pad, std::size_t lout) {
  PhasePlan plan;
  plan.factor = factor;
  const auto f = static_cast<std::ptrdiff_t>(factor);
  const auto p = static_cast<std::ptrdiff_t>(pad);
  const auto k = static_cast<std::ptrdiff_t>(ksize);
  std::vector<std::ptrdiff_t> dmin(factor), dmax(factor);
  std::ptrdiff_t lo = 0, hi = 0;
  plan.outputs.resize(factor);
  for (std::size_t r = 0; r < factor; ++r) {
    const auto rr = static_cast<std::ptrdiff_t>(r);
    dmin[r] = floor_div(rr - p, f);
    dmax[r] = floor_div(rr + k - 1 - p, f);
    plan.outputs[r] = r < lout ? (lout - r + factor - 1) / factor : 0;
    if (plan.outputs[r] == 0) continue;
    lo = std::max(lo, -dmin[r]);
    hi = std::max(hi, static_cast<std::ptrdiff_t>(plan.outputs[r]) - 1 + dmax[r] - (static_cast<std::ptrdiff_t>(len) - 1));
  }
  plan.pad_lo = static_cast<std::size_t>(lo);
  plan.period = len + plan.pad_lo + static_cast<std::size_t>(hi);
  plan.first.resize(factor);
  plan.taps.resize(factor);
  plan.tap_of.resize(factor * ksize);
  for (std::size_t r = 0; r < factor; ++r) {
    plan.first[r] = static_cast<std::size_t>(lo + dmin[r]);
    plan.taps[r] = static_cast<std::size_t>(dmax[r] - dmin[r] + 1);
    for (std::size_t kk = 0; kk < ksize; ++kk) {
      const auto d = floor_div(static_cast<std::ptrdiff_t>(r + kk) - p, f);
      plan.tap_of[r * ksize + kk] = static_cast<std::size_t>(d - dmin[r]);
    }
  }
  return plan;
}

// Merged weights of phase r, (Cout, Cin * taps).
template <class T>
std::vector<T> phase_weights(const PhasePlan& plan, std::size_t r, const std::vector<T>& w, std::size_t cout,
                             std::size_t cin, std::size_t ksize) {
  const std::size_t m = plan.taps[r];
  std::vector<T> out(cout * cin * m, T(0));
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t k = 0; k < ksize; ++k)
        out[(o * cin + ci) * m + plan.tap_of[r * ksize + k]] += w[(o * cin + ci) * ksize + k];
  return out;
}

}  // namespace

// The low-rate input is laid out as (Cin, B * P) with P = L + padding, and
// the virtual im2col row (ci, tap) of a phase is the padded row of ci shifted
// by the tap offset, so no im2col buffer is built. Each phase computes every
// padded column and drops the ones that straddle two items.
template <class T>
Var<T> conv1d_upsampled(Var<T> x, Var<T> w, Var<T> b, std::size_t factor, std::size_t pad) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  require(factor >= 1, "conv1d_upsampled: factor must be >= 1");
  require(ws.d1 == xs.d0, "conv1d: weight " + to_string(ws) + " does not match input " + to_string(xs));
  require(b.shape() == Shape{ws.d0, 1, 1}, "conv1d: bias shape " + to_string(b.shape()));
  require(factor * xs.d2 + 2 * pad >= ws.d2, "conv1d: input shorter than kernel");

  const std::size_t cin = xs.d0, batch = xs.d1, len = xs.d2;
  const std::size_t cout = ws.d0, ksize = ws.d2;
  const std::size_t lout = factor * len + 2 * pad - ksize + 1;
  const auto plan = std::make_shared<const PhasePlan>(plan_phases(factor, len, ksize, pad, lout));
  const std::size_t period = plan->period;
  const std::size_t wide = batch * period;

  auto xpad = std::make_shared<std::vector<T>>(cin * wide, T(0));
  const auto& xv = x.value().values;
  for (std::size_t ci = 0; ci < cin; ++ci)
    for (std::size_t bi = 0; bi < batch; ++bi)
      std::copy_n(xv.data() + (ci * batch + bi) * len, len, xpad->data() + ci * wide + bi * period + plan->pad_lo);

  const auto& kern = simd::kernels<T>();
  const auto& wv = w.value().values;
  const auto& bv = b.value().values;
  // Merged weights per phase; the backward pass reuses them.
  auto wphase = std::make_shared<std::vector<std::vector<T>>>(factor);
  for (std::size_t r = 0; r < factor; ++r) {
    if (plan->outputs[r] > 0) (*wphase)[r] = factor == 1 ? wv : phase_weights(*plan, r, wv, cout, cin, ksize);
  }
  Tensor<T> out(Shape{cout, batch, lout});
  for (std::size_t r = 0; r < factor; ++r) {
    const std::size_t per_item = plan->outputs[r];
    if (per_item == 0) continue;
    const std::size_t m = plan->taps[r], krows = cin * m;
    const std::size_t ncols = (batch - 1) * period + per_item;
    const std::vector<T>& wr = (*wphase)[r];
    std::vector<const T*> rows(krows);
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t t = 0; t < m; ++t) rows[ci * m + t] = xpad->data() + ci * wide + plan->first[r] + t;
    std::vector<T> outp(cout * ncols);
    for (std::size_t o = 0; o < cout; ++o) std::fill_n(outp.data() + o * ncols, ncols, bv[o]);
    kern.gemm_rows(cout, ncols, krows, wr.data(), krows, 1, rows.data(), outp.data(), ncols);
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t bi = 0; bi < batch; ++bi) {
        const T* src = outp.data() + o * ncols + bi * period;
        T* dst = &out.at(o, bi, 0);
        for (std::size_t s2 = 0; s2 < per_item; ++s2) dst[s2 * factor + r] = src[s2];
      }
  }

  const std::size_t xi = x.id, wi = w.id, bi_id = b.id;
  return x.tape->record(
      std::move(out), {xi, wi, bi_id},
      [=](Tape<T>& tape, std::size_t self) {
        const auto& k = simd::kernels<T>();
        const auto& gy = tape.grad(self).values;
        if (tape.needs_grad(bi_id)) {
          auto& gb = tape.grad(bi_id).values;
          for (std::size_t o = 0; o < cout; ++o) {
            T acc = 0;
            for (std::size_t j = 0; j < batch * lout; ++j) acc += gy[o * batch * lout + j];
            gb[o] += acc;
          }
        }
        const bool want_w = tape.needs_grad(wi), want_x = tape.needs_grad(xi);
        if (!want_w && !want_x) return;
        std::vector<T> gxpad(want_x ? cin * wide : 0, T(0));
        for (std::size_t r = 0; r < factor; ++r) {
          const std::size_t per_item = plan->outputs[r];
          if (per_item == 0) continue;
          const std::size_t m = plan->taps[r], krows = cin * m;
          const std::size_t ncols = (batch - 1) * period + per_item;
          // Phase output gradient on padded columns, preceded by `lead` zeros
          // so the input-gradient correlation below never indexes negative.
          const std::size_t lead = plan->first[r] + m - 1;
          const std::size_t gwidth = wide + m - 1;
          std::vector<T> gext(cout * gwidth, T(0));
          for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t b2 = 0; b2 < batch; ++b2) {
              const T* src = gy.data() + (o * batch + b2) * lout + r;
              T* dst = gext.data() + o * gwidth + lead + b2 * period;
              for (std::size_t s2 = 0; s2 < per_item; ++s2) dst[s2] = src[s2 * factor];
            }
          if (want_w) {
            std::vector<const T*> grows(cout), xrows(krows);
            for (std::size_t o = 0; o < cout; ++o) grows[o] = gext.data() + o * gwidth + lead;
            for (std::size_t ci = 0; ci < cin; ++ci)
              for (std::size_t t = 0; t < m; ++t) xrows[ci * m + t] = xpad->data() + ci * wide + plan->first[r] + t;
            auto& gw = tape.grad(wi).values;
            if (factor == 1) {
              k.gemm_nt(cout, krows, ncols, grows.data(), xrows.data(), gw.data(), krows);
            } else {
              std::vector<T> gwr(cout * krows, T(0));
              k.gemm_nt(cout, krows, ncols, grows.data(), xrows.data(), gwr.data(), krows);
              for (std::size_t o = 0; o < cout; ++o)
                for (std::size_t ci = 0; ci < cin; ++ci)
                  for (std::size_t kk = 0; kk < ksize; ++kk)
                    gw[(o * cin + ci) * ksize + kk] += gwr[(o * cin + ci) * m + plan->tap_of[r * ksize + kk]];
            }
          }
          if (want_x) {
            // Correlate with the tap-flipped phase kernel.
            const std::vector<T>& wr = (*wphase)[r];
            const std::size_t fk = cout * m;
            std::vector<T> wflip(cin * fk);
            for (std::size_t ci = 0; ci < cin; ++ci)
              for (std::size_t o = 0; o < cout; ++o)
                for (std::size_t t = 0; t < m; ++t) wflip[ci * fk + o * m + t] = wr[(o * cin + ci) * m + (m - 1 - t)];
            std::vector<const T*> grows(fk);
            for (std::size_t o = 0; o < cout; ++o)
              for (std::size_t t = 0; t < m; ++t) grows[o * m + t] = gext.data() + o * gwidth + t;
            k.gemm_rows(cin, wide, fk, wflip.data(), fk, 1, grows.data(), gxpad.data(), wide);
          }
        }
        if (want_x) {
          auto& gx = tape.grad(xi).values;
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t b2 = 0; b2 < batch; ++b2) {
              const T* src = gxpad.data() + ci * wide + b2 * period + plan->pad_lo;
              T* dst = gx.data() + (ci * batch + b2) * len;
              for (std::size_t t = 0; t < len; ++t) dst[t] += src[t];
            }
        }
      },
      "conv1d");
}

template <class T>
Var<T> conv1d(Var<T> x, Var<T> w, Var<T> b, std::size_t stride, std::size_t pad) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  require(stride >= 1, "conv1d: stride must be >= 1");
  require(ws.d1 == xs.d0, "conv1d: weight " + to_string(ws) + " does not match input " + to_string(xs));
  require(b.shape() == Shape{ws.d0, 1, 1}, "conv1d: bias shape " + to_string(b.shape()));
  require(xs.d2 + 2 * pad >= ws.d2, "conv1d: input shorter than kernel");
  if (stride == 1) return conv1d_upsampled(x, w, b, 1, pad);

  const std::size_t cin = xs.d0, batch = xs.d1, len = xs.d2;
  const std::size_t cout = ws.d0, ksize = ws.d2;
  const std::size_t lout = (len + 2 * pad - ksize) / stride + 1;
  const std::size_t ncols = batch * lout;
  const std::size_t krows = cin * ksize;

  // im2col: row (ci * K + k), column (b * Lout + t)
  auto cols = std::make_shared<std::vector<T>>(krows * ncols, T(0));
  const auto& xv = x.value().values;
  for (std::size_t ci = 0; ci < cin; ++ci) {
    for (std::size_t k = 0; k < ksize; ++k) {
      T* row = cols->data() + (ci * ksize + k) * ncols;
      for (std::size_t bi = 0; bi < batch; ++bi) {
        const T* src = xv.data() + (ci * batch + bi) * len;
        T* dst = row + bi * lout;
        for (std::size_t t = 0; t < lout; ++t) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * stride + k) - static_cast<std::ptrdiff_t>(pad);
          if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) dst[t] = src[pos];
        }
      }
    }
  }

  Tensor<T> out(Shape{cout, batch, lout});
  const auto& bv = b.value().values;
  for (std::size_t o = 0; o < cout; ++o) {
    std::fill_n(out.values.data() + o * ncols, ncols, bv[o]);
  }
  const auto& kern = simd::kernels<T>();
  kern.gemm(cout, ncols, krows, w.value().values.data(), krows, 1, cols->data(), ncols,
            out.values.data(), ncols);

  const std::size_t xi = x.id, wi = w.id, bi_id = b.id;
  return x.tape->record(
      std::move(out), {xi, wi, bi_id},
      [=](Tape<T>& tape, std::size_t self) {
        const auto& k = simd::kernels<T>();
        const T* gy = tape.grad(self).values.data();
        if (tape.needs_grad(wi)) {
          k.gemm_nt(cout, krows, ncols, row_pointers(gy, cout, ncols).data(),
                    row_pointers<T>(cols->data(), krows, ncols).data(), tape.grad(wi).values.data(), krows);
        }
        if (tape.needs_grad(bi_id)) {
          auto& gb = tape.grad(bi_id).values;
          for (std::size_t o = 0; o < cout; ++o) {
            T acc = 0;
            for (std::size_t j = 0; j < ncols; ++j) acc += gy[o * ncols + j];
            gb[o] += acc;
          }
        }
        if (tape.needs_grad(xi)) {
          std::vector<T> gcols(krows * ncols, T(0));
          k.gemm(krows, ncols, cout, tape.value(wi).values.data(), 1, krows, gy, ncols, gcols.data(),
                 ncols);
          auto& gx = tape.grad(xi).values;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            for (std::size_t kk = 0; kk < ksize; ++kk) {
              const T* row = gcols.data() + (ci * ksize + kk) * ncols;
              for (std::size_t b2 = 0; b2 < batch; ++b2) {
                T* dst = gx.data() + (ci * batch + b2) * len;
                const T* src = row + b2 * lout;
                for (std::size_t t = 0; t < lout; ++t) {
                  const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * stride + kk) - static_cast<std::ptrdiff_t>(pad);
                  if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) dst[pos] += src[t];
                }
              }
            }
          }
        }
      },
      "conv1d");
}

template <class T>
Var<T> dense(Var<T> x, Var<T> w, Var<T> b) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  require(xs.d2 == 1, "dense: input must be (features, batch, 1), got " + to_string(xs));
  require(ws.d1 == xs.d0 && ws.d2 == 1, "dense: weight " + to_string(ws) + " does not match input " + to_string(xs));
  require(b.shape() == Shape{ws.d0, 1, 1}, "dense: bias shape " + to_string(b.shape()));
  const std::size_t nin = xs.d0, batch = xs.d1, nout = ws.d0;

  Tensor<T> out(Shape{nout, batch, 1});
  const auto& bv = b.value().values;
  for (std::size_t o = 0; o < nout; ++o) std::fill_n(out.values.data() + o * batch, batch, bv[o]);
  simd::kernels<T>().gemm(nout, batch, nin, w.value().values.data(), nin, 1, x.value().values.data(),
                          batch, out.values.data(), batch);

  const std::size_t xi = x.id, wi = w.id, bi = b.id;
  return x.tape->record(
      std::move(out), {xi, wi, bi},
      [=](Tape<T>& tape, std::size_t self) {
        const auto& k = simd::kernels<T>();
        const T* gy = tape.grad(self).values.data();
        if (tape.needs_grad(wi)) {
          k.gemm_nt(nout, nin, batch, row_pointers(gy, nout, batch).data(),
                    row_pointers(tape.value(xi).values.data(), nin, batch).data(), tape.grad(wi).values.data(), nin);
        }
        if (tape.needs_grad(bi)) {
          auto& gb = tape.grad(bi).values;
          for (std::size_t o = 0; o < nout; ++o) {
            T acc = 0;
            for (std::size_t j = 0; j < batch; ++j) acc += gy[o * batch + j];
            gb[o] += acc;
          }
        }
        if (tape.needs_grad(xi)) {
          k.gemm(nin, batch, nout, tape.value(wi).values.data(), 1, nin, gy, batch,
                 tape.grad(xi).values.data(), batch);
        }
      },
      "dense");
}

template <class T>
Var<T> upsample_nearest(Var<T> x, std::size_t factor) {
  require(factor >= 1, "upsample_nearest: factor must be >= 1");
  const Shape xs = x.shape();
  const std::size_t rows = xs.d0 * xs.d1, len = xs.d2;
  Tensor<T> out(Shape{xs.d0, xs.d1, len * factor});
  const auto& xv = x.value().values;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < len; ++t) {
      std::fill_n(out.values.data() + (r * len + t) * factor, factor, xv[r * len + t]);
    }
  }
  const std::size_t xi = x.id;
  return x.tape->record(
      std::move(out), {xi},
      [=](Tape<T>& tape, std::size_t self) {
        const auto& gy = tape.grad(self).values;
        auto& gx = tape.grad(xi).values;
        for (std::size_t i = 0; i < gx.size(); ++i) {
          T acc = 0;
          for (std::size_t f = 0; f < factor; ++f) acc += gy[i * factor + f];
          gx[i] += acc;
        }
      },
      "upsample_nearest");
}

template <class T>
Var<T> leaky_relu(Var<T> x, T slope) {
  const auto& xv = x.value().values;
  require(slope > T(0), "leaky_relu: slope must be positive");
  Tensor<T> out(x.shape());
  // Branch-free: activation signs are close to random, so a branch mispredicts half the time.
  const T* __restrict a = xv.data();
  T* __restrict o = out.values.data();
  for (std::size_t i = 0; i < xv.size(); ++i) o[i] = std::max(a[i], T(0)) + slope * std::min(a[i], T(0));
  // A positive slope keeps the sign, so the output selects the branch.
  return elementwise_from_output(
      x, std::move(out), [slope](T y) { return y > T(0) ? T(1) : slope; }, "leaky_relu");
}

template <class T>
Var<T> tanh(Var<T> x) {
  const auto& xv = x.value().values;
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out.values[i] = std::tanh(xv[i]);
  return elementwise_from_output(x, std::move(out), [](T y) { return T(1) - y * y; }, "tanh");
}

template <class T>
Var<T> exp(Var<T> x) {
  const auto& xv = x.value().values;
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out.values[i] = std::exp(xv[i]);
  return elementwise_from_output(x, std::move(out), [](T y) { return y; }, "exp");
}

template <class T>
Var<T> scale(Var<T> x, T factor) {
  Tensor<T> out = x.value();
  for (T& v : out.values) v *= factor;
  return elementwise_from_output(x, std::move(out), [factor](T) { return factor; }, "scale");
}

template <class T>
Var<T> add(Var<T> x, Var<T> y) {
  require(x.shape() == y.shape(), "add: shape mismatch " + to_string(x.shape()) + " vs " + to_string(y.shape()));
  Tensor<T> out = x.value();
  const auto& yv = y.value().values;
  for (std::size_t i = 0; i < yv.size(); ++i) out.values[i] += yv[i];
  const std::size_t xi = x.id, yi = y.id;
  return x.tape->record(
      std::move(out), {xi, yi},
      [=](Tape<T>& tape, std::size_t self) {
        const auto& gy = tape.grad(self).values;
        for (const std::size_t p : {xi, yi}) {
          if (!tape.needs_grad(p)) continue;
          auto& g = tape.grad(p).values;
          for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i];
        }
      },
      "add");
}

template <class T>
Var<T> mul(Var<T> x, Var<T> y) {
  require(x.shape() == y.shape(), "mul: shape mismatch " + to_string(x.shape()) + " vs " + to_string(y.shape()));
  Tensor<T> out = x.value();
  const auto& yv = y.value().values;
  for (std::size_t i = 0; i < yv.size(); ++i) out.values[i] *= yv[i];
  const std::size_t xi = x.id, yi = y.id;
  return x.tape->record(
      std::move(out), {xi, yi},
      [=](Tape<T>& tape, std::size_t self) {
        const auto& gy = tape.grad(self).values;
        if (tape.needs_grad(xi)) {
          const auto& other = tape.value(yi).values;
          auto& g = tape.grad(xi).values;
          for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * other[i];
        }
        if (tape.needs_grad(yi)) {
          const auto& other = tape.value(xi).values;
          auto& g = tape.grad(yi).values;
          for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * other[i];
        }
      },
      "mul");
}

template <class T>
Var<T> sum(Var<T> x) {
  T acc = 0;
  for (const T v : x.value().values) acc += v;
  const std::size_t xi = x.id;
  return x.tape->record(
      Tensor<T>(Shape{1, 1, 1}, acc), {xi},
      [=](Tape<T>& tape, std::size_t self) {
        const T g = tape.grad(self).values[0];
        for (T& v : tape.grad(xi).values) v += g;
      },
      "sum");
}

template <class T>
Var<T> flatten(Var<T> x) {
  const Shape xs = x.shape();
  const std::size_t ch = xs.d0, batch = xs.d1, len = xs.d2;
  Tensor<T> out(Shape{ch * len, batch, 1});
  const auto& xv = x.value().values;
  for (std::size_t c = 0; c < ch; ++c)
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t l = 0; l < len; ++l) out.values[(c * len + l) * batch + b] = xv[(c * batch + b) * len + l];
  const std::size_t xi = x.id;
  return x.tape->record(
      std::move(out), {xi},
      [=](Tape<T>& tape, std::size_t self) {
        const auto& gy = tape.grad(self).values;
        auto& gx = tape.grad(xi).values;
        for (std::size_t c = 0; c < ch; ++c)
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t l = 0; l < len; ++l) gx[(c * batch + b) * len + l] += gy[(c * len + l) * batch + b];
      },
      "flatten");
}

template <class T>
Var<T> unflatten(Var<T> x, std::size_t ch, std::size_t len) {
  const Shape xs = x.shape();
  require(xs.d2 == 1 && xs.d0 == ch * len, "unflatten: cannot view " + to_string(xs) + " as " +
                                                std::to_string(ch) + " x " + std::to_string(len));
  const std::size_t batch = xs.d1;
  Tensor<T> out(Shape{ch, batch, len});
  const auto& xv = x.value().values;
  for (std::size_t c = 0; c < ch; ++c)
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t l = 0; l < len; ++l) out.values[(c * batch + b) * len + l] = xv[(c * len + l) * batch + b];
  const std::size_t xi = x.id;
  return x.tape->record(
      std::move(out), {xi},
      [=](Tape<T>& tape, std::size_t self) {
        const auto& gy = tape.grad(self).values;
        auto& gx = tape.grad(xi).values;
        for (std::size_t c = 0; c < ch; ++c)
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t l = 0; l < len; ++l) gx[(c * len + l) * batch + b] += gy[(c * batch + b) * len + l];
      },
      "unflatten");
}

template <class T>
Var<T> concat_channels(Var<T> x, Var<T> y) {
  const Shape xs = x.shape(), ys = y.shape();
  require(xs.d1 == ys.d1 && xs.d2 == ys.d2,
          "concat_channels: shape mismatch " + to_string(xs) + " vs " + to_string(ys));
  Tensor<T> out(Shape{xs.d0 + ys.d0, xs.d1, xs.d2});
  std::copy(x.value().values.begin(), x.value().values.end(), out.values.begin());
  std::copy(y.value().values.begin(), y.value().values.end(), out.values.begin() + xs.size());
  const std::size_t xi = x.id, yi = y.id, split = xs.size();
  return x.tape->record(
      std::move(out), {xi, yi},
      [=](Tape<T>& tape, std::size_t self) {
        const auto& gy = tape.grad(self).values;
        if (tape.needs_grad(xi)) {
          auto& g = tape.grad(xi).values;
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
        }
        if (tape.needs_grad(yi)) {
          auto& g = tape.grad(yi).values;
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[split + i];
        }
      },
      "concat_channels");
}

#define WTCVAE_INSTANTIATE_OPS(T)                                                   \
  template Var<T> conv1d(Var<T>, Var<T>, Var<T>, std::size_t, std::size_t);        \
  template Var<T> conv1d_upsampled(Var<T>, Var<T>, Var<T>, std::size_t, std::size_t); \
  template Var<T> dense(Var<T>, Var<T>, Var<T>);                                    \
  template Var<T> upsample_nearest(Var<T>, std::size_t);                            \
  template Var<T> leaky_relu(Var<T>, T);                                            \
  template Var<T> tanh(Var<T>);                                                     \
  template Var<T> exp(Var<T>);                                                      \
  template Var<T> add(Var<T>, Var<T>);                                              \
  template Var<T> mul(Var<T>, Var<T>);                                              \
  template Var<T> scale(Var<T>, T);                                                 \
  template Var<T> sum(Var<T>);                                                      \
  template Var<T> flatten(Var<T>);                                                  \
  template Var<T> unflatten(Var<T>, std::size_t, std::size_t);                      \
  template Var<T> concat_channels(Var<T>, Var<T>);

WTCVAE_INSTANTIATE_OPS(float)
WTCVAE_INSTANTIATE_OPS(double)

#undef WTCVAE_INSTANTIATE_OPS

}  // namespace wtcvae::ad
