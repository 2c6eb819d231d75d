#pragma once

// Minimal reverse-mode autodiff over small 3-d tensors.
//
// Activations are stored channel-major: shape (channels, batch, samples) with
// element (c, b, l) at ((c * batch) + b) * samples + l. Keeping the batch
// inside each channel row lets a 1-d convolution over the whole batch run as
// a single GEMM. Feature vectors are (features, batch, 1).

#include <algorithm>
#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace wtcvae::ad {

struct Shape {
  std::size_t d0 = 1;
  std::size_t d1 = 1;
  std::size_t d2 = 1;

  std::size_t size() const { return d0 * d1 * d2; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

template <class T>
struct Tensor {
  Shape shape;
  std::vector<T> values;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(s), values(s.size(), fill) {}
  Tensor(Shape s, std::vector<T> v) : shape(s), values(std::move(v)) {
    if (values.size() != shape.size()) throw ShapeError("tensor value count does not match shape");
  }

  std::size_t size() const { return values.size(); }
  T& operator[](std::size_t i) { return values[i]; }
  const T& operator[](std::size_t i) const { return values[i]; }
  T& at(std::size_t i0, std::size_t i1, std::size_t i2) {
    return values[(i0 * shape.d1 + i1) * shape.d2 + i2];
  }
  const T& at(std::size_t i0, std::size_t i1, std::size_t i2) const {
    return values[(i0 * shape.d1 + i1) * shape.d2 + i2];
  }
};

// A trainable tensor. Gradients accumulate across backward() calls until
// zero_grad().
template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter(std::string n, Shape s) : name(std::move(n)), value(s), grad(s) {}
  void zero_grad() { std::fill(grad.values.begin(), grad.values.end(), T(0)); }
};

template <class T>
class Tape;

template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(id); }
  const Shape& shape() const { return tape->value(id).shape; }
};

template <class T>
class Tape {
 public:
  // Propagates gradient from node `self` to its parents.
  using Backward = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value);
  Var<T> parameter(Parameter<T>& p);

  // Appends an op result. `backward` is only invoked when some parent needs a
  // gradient. Throws NonFiniteError when finite checking is on and `value`
  // contains NaN or Inf.
  Var<T> record(Tensor<T> value, std::initializer_list<std::size_t> parents, Backward backward,
                const char* op_name);

  const Tensor<T>& value(std::size_t id) const { return nodes_[id].value; }

  // Gradient buffer of a node, zero-filled on first access.
  Tensor<T>& grad(std::size_t id);
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  // Accumulates d(loss)/d(parameter) into every Parameter reachable from
  // `loss`. A tape can be differentiated once.
  void backward(Var<T> loss);

  std::size_t size() const { return nodes_.size(); }
  bool check_finite() const { return check_finite_; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    Backward backward;
    Parameter<T>* param = nullptr;
    bool needs_grad = false;
  };

  // deque: value() references stay valid while the tape grows.
  std::deque<Node> nodes_;
  bool check_finite_;
  bool differentiated_ = false;
};

enum class Activation { leaky_relu, tanh };

inline constexpr double kLeakySlope = 0.2;

// Cross-correlation of x (Cin, B, L) with w (Cout, Cin, K) plus bias b (Cout, 1, 1).
// Output length is (L + 2 * pad - K) / stride + 1; pad = (K - 1) / 2 yields
// ceil(L / stride).
template <class T>
Var<T> conv1d(Var<T> x, Var<T> w, Var<T> b, std::size_t stride, std::size_t pad);

// Equals conv1d(upsample_nearest(x, factor), w, b, 1, pad) without building
// the upsampled signal: each output phase uses a kernel whose taps that land
// on the same input sample are pre-summed.
template <class T>
Var<T> conv1d_upsampled(Var<T> x, Var<T> w, Var<T> b, std::size_t factor, std::size_t pad);

// y = W x + b for x (F, B, 1), W (M, F, 1), b (M, 1, 1).
template <class T>
Var<T> dense(Var<T> x, Var<T> w, Var<T> b);

template <class T>
Var<T> upsample_nearest(Var<T> x, std::size_t factor);

template <class T>
Var<T> leaky_relu(Var<T> x, T slope = T(kLeakySlope));

template <class T>
Var<T> tanh(Var<T> x);

template <class T>
Var<T> activation(Var<T> x, Activation kind) {
  return kind == Activation::tanh ? tanh(x) : leaky_relu(x);
}

template <class T>
Var<T> exp(Var<T> x);

template <class T>
Var<T> add(Var<T> x, Var<T> y);

template <class T>
Var<T> mul(Var<T> x, Var<T> y);

template <class T>
Var<T> scale(Var<T> x, T factor);

// Sum of all elements, shape (1, 1, 1).
template <class T>
Var<T> sum(Var<T> x);

// (C, B, L) -> (C * L, B, 1), feature index c * L + l.
template <class T>
Var<T> flatten(Var<T> x);

// (C * L, B, 1) -> (C, B, L).
template <class T>
Var<T> unflatten(Var<T> x, std::size_t channels, std::size_t length);

// (C1, B, L) ++ (C2, B, L) -> (C1 + C2, B, L).
template <class T>
Var<T> concat_channels(Var<T> x, Var<T> y);

}  // namespace wtcvae::ad
