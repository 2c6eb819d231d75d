#pragma once

// Central-difference check of reverse-mode gradients, in 64-bit.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wtcvae/autodiff.hpp"

namespace wtcvae::ad {

struct GradCheckOptions {
  double step = 1e-5;
  // Every coordinate is checked when the parameters hold at most this many;
  // otherwise a seeded random subset of exactly this size.
  std::size_t max_coordinates = 256;
  std::uint64_t seed = 7;
  // The relative-error denominator is at least floor * max(1, |L|), so
  // coordinates whose gradient is below what a central difference can resolve
  // (its rounding error is ~eps * |L| / h) are judged on absolute error.
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  double loss = 0.0;
};

// Builds a scalar loss from the tape and one Var per parameter (same order).
using LossBuilder = std::function<Var<double>(Tape<double>&, std::span<const Var<double>>)>;

// Runs one backward pass, then compares each selected coordinate against
// (L(p + h) - L(p - h)) / 2h. Parameter values are restored; gradients are
// left holding the analytic result.
GradCheckResult grad_check(std::span<Parameter<double>* const> params, const LossBuilder& loss,
                           const GradCheckOptions& options = {});

}  // namespace wtcvae::ad
