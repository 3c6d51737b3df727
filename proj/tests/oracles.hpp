#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

// Brute-force reference implementations, written independently of the library.
namespace avq::oracle {

inline double mean(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Rank of x[i] = 1 + #{j : x[j] < x[i]} + (#{j != i : x[j] == x[i]}) / 2.
inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j] < x[i]) less += 1;
      else if (j != i && x[j] == x[i]) equal += 1;
    }
    r[i] = 1 + less + equal / 2;
  }
  return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(ranks(x), ranks(y));
}

inline double rmse(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s / static_cast<double>(x.size()));
}

inline double ccc(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size()), mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return 2 * (sxy / n) / (sxx / n + syy / n + (mx - my) * (mx - my));
}

}  // namespace avq::oracle

#include "avq/baseline/svr.hpp"

namespace avq::oracle {

/// Largest violation of the epsilon-SVR optimality conditions, recomputed from
/// the dual variables with f(x_i) = sum_j (a_j - a*_j) K(x_i, x_j) + b:
///   a_i = a*_i = 0  =>  |y_i - f_i| <= eps
///   0 < a_i < C     =>  y_i - f_i = eps      a_i = C   =>  y_i - f_i >= eps
///   0 < a*_i < C    =>  f_i - y_i = eps      a*_i = C  =>  f_i - y_i >= eps
inline double svr_kkt_violation(const Matrix& x, const std::vector<double>& y, const SvrFit& fit) {
  const auto& p = fit.model.params;
  double worst = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double f = fit.model.bias;
    for (std::size_t j = 0; j < y.size(); ++j) {
      double d2 = 0;
      for (std::size_t c = 0; c < x.cols(); ++c) d2 += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
      f += (fit.alpha[j] - fit.alpha_star[j]) * std::exp(-p.gamma * d2);
    }
    const double r = y[i] - f, a = fit.alpha[i], as = fit.alpha_star[i];
    double v = 0.0;
    if (a > 0 && a < p.C) v = std::max(v, std::abs(r - p.epsilon));
    if (a >= p.C) v = std::max(v, p.epsilon - r);
    if (as > 0 && as < p.C) v = std::max(v, std::abs(-r - p.epsilon));
    if (as >= p.C) v = std::max(v, p.epsilon + r);
    if (a == 0 && as == 0) v = std::max(v, std::abs(r) - p.epsilon);
    worst = std::max(worst, v);
  }
  return worst;
}

}  // namespace avq::oracle
