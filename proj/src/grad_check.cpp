#include "wtcvae/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

namespace wtcvae::ad {

namespace {

double evaluate(std::span<Parameter<double>* const> params, const LossBuilder& loss, bool differentiate) {
  Tape<double> tape;
  std::vector<Var<double>> vars;
  vars.reserve(params.size());
  for (Parameter<double>* p : params) vars.push_back(tape.parameter(*p));
  const Var<double> l = loss(tape, vars);
  const double value = l.value().values.at(0);
  if (differentiate) tape.backward(l);
  return value;
}

}  // namespace

GradCheckResult grad_check(std::span<Parameter<double>* const> params, const LossBuilder& loss,
                           const GradCheckOptions& options) {
  for (Parameter<double>* p : params) p->zero_grad();
  GradCheckResult result;
  result.loss = evaluate(params, loss, true);
  const double floor = options.floor * std::max(1.0, std::abs(result.loss));

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t pi = 0; pi < params.size(); ++pi)
    for (std::size_t i = 0; i < params[pi]->value.size(); ++i) coords.emplace_back(pi, i);
  if (coords.size() > options.max_coordinates) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coordinates);
  }

  for (const auto& [pi, i] : coords) {
    double& v = params[pi]->value.values[i];
    const double saved = v;
    v = saved + options.step;
    const double up = evaluate(params, loss, false);
    v = saved - options.step;
    const double down = evaluate(params, loss, false);
    v = saved;
    const double numeric = (up - down) / (2.0 * options.step);
    const double analytic = params[pi]->grad.values[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    const double err = std::abs(analytic - numeric) / denom;
    ++result.coordinates;
    if (err > result.max_relative_error || result.coordinates == 1) {
      result.max_relative_error = std::max(result.max_relative_error, err);
      result.worst_parameter = params[pi]->name;
      result.worst_index = i;
      result.worst_analytic = analytic;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

}  // namespace wtcvae::ad
