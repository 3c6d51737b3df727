#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "avq/tensor/matrix.hpp"
#include "avq/tensor/ops.hpp"
#include "avq/tensor/rng.hpp"
#include "avq/tensor/tape.hpp"

namespace avq::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(lo, hi);
  return m;
}

inline std::vector<double> random_vector(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

/// |a - n| / max(|a|, |n|, floor): relative error with a floor below which
/// both values count as zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

inline double evaluate_loss(std::vector<Matrix>& inputs, const LossBuilder& build) {
  Tape tape;
  std::vector<Var> vars;
  for (auto& m : inputs) vars.push_back(tape.parameter(m));
  return build(tape, vars).value()(0, 0);
}

/// Largest relative error between reverse-mode and central-difference
/// gradients over every entry of every input.
inline double max_gradient_error(std::vector<Matrix> inputs, const LossBuilder& build, double h = 1e-6) {
  std::vector<Matrix> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (auto& m : inputs) vars.push_back(tape.parameter(m));
    tape.backward(build(tape, vars));
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }
  double worst = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    for (std::size_t i = 0; i < inputs[t].size(); ++i) {
      const double saved = inputs[t][i];
      inputs[t][i] = saved + h;
      const double up = evaluate_loss(inputs, build);
      inputs[t][i] = saved - h;
      const double down = evaluate_loss(inputs, build);
      inputs[t][i] = saved;
      worst = std::max(worst, relative_error(analytic[t][i], (up - down) / (2 * h)));
    }
  }
  return worst;
}

/// Reduces a matrix-valued node to a scalar with fixed random weights so every
/// output entry contributes a distinct gradient.
inline Var weighted_sum(Tape& tape, Var x, std::uint64_t seed = 99) {
  Rng rng(seed);
  Var w = tape.constant(random_matrix(x.rows(), x.cols(), rng));
  return sum(hadamard(x, w));
}

}  // namespace avq::testing

#include <span>
#include <string>

#include "avq/model/fusion_net.hpp"
#include "avq/train/loss.hpp"

namespace avq::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // tensor name and flat index of the worst entry
};

/// Central-difference check of d(composite loss)/d(parameter) through the whole
/// network in train mode. Dropout draws from a fresh Rng(seed) on every pass so
/// all evaluations share one mask. `per_tensor` entries are sampled from each
/// tensor (all of them when the tensor is smaller).
inline GradCheck model_gradient_check(FusionNetParams params, const ModelInput& input,
                                      std::span<const double> target, double lambda, std::size_t per_tensor,
                                      std::uint64_t seed, double h = 1e-5) {
  auto loss = [&](const FusionNetParams& p, std::vector<Matrix>* grads) {
    Tape tape;
    const BoundParams bound = bind(tape, p);
    Rng drop(seed);
    ForwardOptions opts;
    opts.mode = Mode::train;
    opts.rng = &drop;
    const ForwardTrace tr = forward(tape, bound, p.config, input, opts);
    Var l = composite_loss(tr.prediction, target, lambda);
    if (grads) {
      tape.backward(l);
      *grads = collect_grads(tape, bound);
    }
    return l.value()(0, 0);
  };
  std::vector<Matrix> analytic;
  loss(params, &analytic);

  GradCheck out;
  Rng pick(seed ^ 0x5eed);
  auto tensors = params.tensors();
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    Matrix& m = *tensors[t].second;
    std::vector<std::size_t> idx;
    if (m.size() <= per_tensor) {
      idx.resize(m.size());
      std::iota(idx.begin(), idx.end(), 0);
    } else {
      for (std::size_t k = 0; k < per_tensor; ++k) idx.push_back(pick.next_u64() % m.size());
    }
    for (std::size_t i : idx) {
      const double saved = m[i];
      m[i] = saved + h;
      const double up = loss(params, nullptr);
      m[i] = saved - h;
      const double down = loss(params, nullptr);
      m[i] = saved;
      const double err = relative_error(analytic[t][i], (up - down) / (2 * h));
      ++out.checked;
      if (err > out.max_rel_error) {
        out.max_rel_error = err;
        out.worst = tensors[t].first + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

/// Random batch of `batch` sequences of length n at the config's widths.
inline ModelInput random_input(const ModelConfig& c, std::size_t batch, std::size_t n, Rng& rng) {
  return {random_matrix(batch * n, c.d_model, rng), random_matrix(batch * n, c.d_video, rng), n};
}

}  // namespace avq::testing
