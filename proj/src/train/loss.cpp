#include "avq/train/loss.hpp"

#include <cmath>
#include <string>

#include <spdlog/spdlog.h>

#include "avq/errors.hpp"

namespace avq {
namespace {

struct Moments {
  double mean_p = 0.0;
  double mean_t = 0.0;
  double var_p = 0.0;
  double var_t = 0.0;
  double cov = 0.0;
  double denom = 0.0;  // var_p + var_t + (mean_p - mean_t)^2
  bool degenerate = false;
};

Moments moments(std::span<const double> p, std::span<const double> t) {
  const double n = static_cast<double>(p.size());
  Moments m;
  for (std::size_t i = 0; i < p.size(); ++i) {
    m.mean_p += p[i];
    m.mean_t += t[i];
  }
  m.mean_p /= n;
  m.mean_t /= n;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double dp = p[i] - m.mean_p;
    const double dt = t[i] - m.mean_t;
    m.var_p += dp * dp;
    m.var_t += dt * dt;
    m.cov += dp * dt;
  }
  m.var_p /= n;
  m.var_t /= n;
  m.cov /= n;
  const double shift = m.mean_p - m.mean_t;
  m.denom = m.var_p + m.var_t + shift * shift;
  m.degenerate = m.var_p == 0.0 && m.var_t == 0.0;
  return m;
}

void require_pair(std::span<const double> p, std::span<const double> t) {
  if (p.size() != t.size()) {
    throw ContractError("ccc: length mismatch " + std::to_string(p.size()) + " vs " + std::to_string(t.size()));
  }
  if (p.size() < 2) throw ContractError("ccc: needs at least 2 values");
}

void require_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ConfigError("loss mix lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
}

double ccc_from(const Moments& m) {
  if (m.degenerate) {
    spdlog::warn("ccc: both inputs constant; concordance defined as 0");
    return 0.0;
  }
  return 2.0 * m.cov / m.denom;
}

double rmse_of(std::span<const double> p, std::span<const double> t) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
  return std::sqrt(s / static_cast<double>(p.size()));
}

}  // namespace

double ccc(std::span<const double> pred, std::span<const double> target) {
  require_pair(pred, target);
  return ccc_from(moments(pred, target));
}

LossParts composite_loss(std::span<const double> pred, std::span<const double> target, double lambda) {
  require_lambda(lambda);
  require_pair(pred, target);
  LossParts parts;
  parts.ccc = ccc_from(moments(pred, target));
  parts.rmse = rmse_of(pred, target);
  parts.loss = lambda * (1.0 - parts.ccc) + (1.0 - lambda) * parts.rmse;
  return parts;
}

Var composite_loss(Var pred, std::span<const double> target, double lambda) {
  const Matrix& pv = pred.value();
  if (pv.cols() != 1) throw DimensionError("composite_loss: prediction must be [B x 1], got " + pv.shape());
  std::vector<double> t(target.begin(), target.end());
  const LossParts parts = composite_loss(pv.data(), t, lambda);
  return pred.tape().record(
      Matrix(1, 1, parts.loss), {pred}, [pred, t = std::move(t), lambda, parts](Tape& tape, const Matrix& g) {
        const auto p = pred.value().data();
        const std::size_t n = p.size();
        const double nd = static_cast<double>(n);
        const Moments m = moments(p, t);
        Matrix grad(n, 1);
        for (std::size_t i = 0; i < n; ++i) {
          double d_ccc = 0.0;
          if (!m.degenerate) {
            // d(2 cov / D)/dp_i with dcov = (t_i - mean_t)/n and
            // dD = 2 (p_i - mean_p)/n + 2 (mean_p - mean_t)/n.
            const double dcov = (t[i] - m.mean_t) / nd;
            const double dden = 2.0 * (p[i] - m.mean_p) / nd + 2.0 * (m.mean_p - m.mean_t) / nd;
            d_ccc = (2.0 * dcov * m.denom - 2.0 * m.cov * dden) / (m.denom * m.denom);
          }
          const double d_rmse = parts.rmse > 0.0 ? (p[i] - t[i]) / (nd * parts.rmse) : 0.0;
          grad[i] = g[0] * (-lambda * d_ccc + (1.0 - lambda) * d_rmse);
        }
        tape.accumulate(pred, std::move(grad));
      });
}

}  // namespace avq
