#include "avq/baseline/svr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "avq/errors.hpp"
#include "avq/eval/metrics.hpp"

namespace avq {
namespace {

constexpr double kTau = 1e-12;

// LIBSVM-style solver over the 2l-variable form of the epsilon-SVR dual:
//   min 0.5 a'Qa + p'a  s.t.  y'a = 0, 0 <= a <= C
// with y = (+1..., -1...), p = (eps - t, eps + t), Q_st = y_s y_t K(s mod l, t mod l).
class SmoSolver {
 public:
  SmoSolver(const Matrix& kernel, std::span<const double> target, const SvrParams& params)
      : k_(kernel), l_(target.size()), c_(params.C), alpha_(2 * l_, 0.0), grad_(2 * l_) {
    for (std::size_t i = 0; i < l_; ++i) {
      grad_[i] = params.epsilon - target[i];
      grad_[i + l_] = params.epsilon + target[i];
    }
  }

  // Returns false when the cap is reached before the tolerance.
  bool solve(const SvrSolverOptions& options) {
    while (iterations_ < options.max_iterations) {
      std::size_t i = 0, j = 0;
      violation_ = select_working_set(i, j);
      if (violation_ < options.tolerance) return true;
      ++iterations_;
      update(i, j);
    }
    std::size_t i = 0, j = 0;
    violation_ = select_working_set(i, j);
    return violation_ < options.tolerance;
  }

  double rho() const {
    double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < 2 * l_; ++t) {
      const double yg = y(t) * grad_[t];
      if (at_upper(t)) {
        if (y(t) < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
      } else if (at_lower(t)) {
        if (y(t) > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
      } else {
        ++n_free;
        sum_free += yg;
      }
    }
    return n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
  }

  const std::vector<double>& alpha() const { return alpha_; }
  std::size_t iterations() const { return iterations_; }
  double violation() const { return violation_; }

 private:
  double y(std::size_t t) const { return t < l_ ? 1.0 : -1.0; }
  double q(std::size_t s, std::size_t t) const { return y(s) * y(t) * k_(s % l_, t % l_); }
  double qd(std::size_t t) const { return k_(t % l_, t % l_); }
  bool at_upper(std::size_t t) const { return alpha_[t] >= c_; }
  bool at_lower(std::size_t t) const { return alpha_[t] <= 0.0; }

  // Second-order selection; returns m(a) - M(a), the maximal violation.
  double select_working_set(std::size_t& out_i, std::size_t& out_j) const {
    const std::size_t n = 2 * l_;
    double gmax = -std::numeric_limits<double>::infinity(), gmax2 = gmax;
    std::ptrdiff_t gi = -1, gj = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y(t) > 0) {
        if (!at_upper(t) && -grad_[t] >= gmax) { gmax = -grad_[t]; gi = static_cast<std::ptrdiff_t>(t); }
      } else {
        if (!at_lower(t) && grad_[t] >= gmax) { gmax = grad_[t]; gi = static_cast<std::ptrdiff_t>(t); }
      }
    }
    double obj_min = std::numeric_limits<double>::infinity();
    const std::size_t i = gi < 0 ? 0 : static_cast<std::size_t>(gi);
    for (std::size_t t = 0; t < n; ++t) {
      double grad_diff = 0.0;
      if (y(t) > 0) {
        if (at_lower(t)) continue;
        gmax2 = std::max(gmax2, grad_[t]);
        grad_diff = gmax + grad_[t];
      } else {
        if (at_upper(t)) continue;
        gmax2 = std::max(gmax2, -grad_[t]);
        grad_diff = gmax - grad_[t];
      }
      if (gi < 0 || grad_diff <= 0.0) continue;
      double quad = qd(i) + qd(t) - 2.0 * y(i) * y(t) * q(i, t);
      if (quad <= 0.0) quad = kTau;
      const double obj = -(grad_diff * grad_diff) / quad;
      if (obj <= obj_min) {
        obj_min = obj;
        gj = static_cast<std::ptrdiff_t>(t);
      }
    }
    if (gi < 0 || gj < 0) return 0.0;
    out_i = static_cast<std::size_t>(gi);
    out_j = static_cast<std::size_t>(gj);
    return gmax + gmax2;
  }

  void update(std::size_t i, std::size_t j) {
    const double old_i = alpha_[i], old_j = alpha_[j];
    double& ai = alpha_[i];
    double& aj = alpha_[j];
    const double qij = q(i, j);
    if (y(i) != y(j)) {
      double quad = qd(i) + qd(j) + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad_[i] - grad_[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) { aj = 0.0; ai = diff; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = -diff; }
      }
      if (diff > 0.0) {
        if (ai > c_) { ai = c_; aj = c_ - diff; }
      } else {
        if (aj > c_) { aj = c_; ai = c_ + diff; }
      }
    } else {
      double quad = qd(i) + qd(j) - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad_[i] - grad_[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > c_) {
        if (ai > c_) { ai = c_; aj = sum - c_; }
      } else {
        if (aj < 0.0) { aj = 0.0; ai = sum; }
      }
      if (sum > c_) {
        if (aj > c_) { aj = c_; ai = sum - c_; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = sum; }
      }
    }
    const double di = ai - old_i, dj = aj - old_j;
    for (std::size_t t = 0; t < 2 * l_; ++t) grad_[t] += q(i, t) * di + q(j, t) * dj;
  }

  const Matrix& k_;
  std::size_t l_;
  double c_;
  std::vector<double> alpha_;
  std::vector<double> grad_;
  std::size_t iterations_ = 0;
  double violation_ = 0.0;
};

double require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DataError(fmt::format("SVR feature {} is not finite", what));
  return v;
}

Matrix feature_matrix(const Dataset& ds, SvrFeatureSet s) {
  Matrix x(ds.size(), feature_count(s));
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const auto row = svr_features(ds[r], s);
    std::copy(row.begin(), row.end(), x.row(r).begin());
  }
  return x;
}

}  // namespace

SvrFeatureSet parse_svr_features(std::string_view label) {
  if (label == "2F") return SvrFeatureSet::f2;
  if (label == "3F") return SvrFeatureSet::f3;
  if (label == "7F") return SvrFeatureSet::f7;
  if (label == "8F") return SvrFeatureSet::f8;
  throw ConfigError(fmt::format("unknown SVR feature set '{}' (expected 2F, 3F, 7F or 8F)", label));
}

std::string_view to_string(SvrFeatureSet s) {
  switch (s) {
    case SvrFeatureSet::f2: return "2F";
    case SvrFeatureSet::f3: return "3F";
    case SvrFeatureSet::f7: return "7F";
    case SvrFeatureSet::f8: return "8F";
  }
  return "?";
}

std::size_t feature_count(SvrFeatureSet s) {
  switch (s) {
    case SvrFeatureSet::f2: return 2;
    case SvrFeatureSet::f3: return 3;
    case SvrFeatureSet::f7: return 7;
    case SvrFeatureSet::f8: return 8;
  }
  return 0;
}

std::vector<double> svr_features(const FeatureRecord& record, SvrFeatureSet s) {
  std::vector<double> out;
  out.reserve(feature_count(s));
  out.push_back(require_finite(record.q_a, "q_a"));
  if (s == SvrFeatureSet::f2 || s == SvrFeatureSet::f3) {
    out.push_back(require_finite(record.q_v, "q_v"));
  } else {
    if (record.video_feat.size() != kVideoDim) {
      throw DataError(fmt::format("SVR-{} needs {} VMAF features for '{}', found {}", to_string(s), kVideoDim,
                                  record.stimulus_id, record.video_feat.size()));
    }
    for (double v : record.video_feat) out.push_back(require_finite(v, "vmaf"));
  }
  if (s == SvrFeatureSet::f3 || s == SvrFeatureSet::f8) {
    out.push_back(require_finite(record.audio_bitrate_kbps, "audio_bitrate_kbps"));
  }
  return out;
}

void SvrParams::validate() const {
  if (!(C > 0.0) || !(gamma > 0.0) || !(epsilon >= 0.0) || !std::isfinite(C) || !std::isfinite(gamma) ||
      !std::isfinite(epsilon)) {
    throw ConfigError(fmt::format("SVR needs C > 0, gamma > 0, epsilon >= 0; got C={} gamma={} epsilon={}", C,
                                  gamma, epsilon));
  }
}

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  if (a.size() != b.size()) throw DimensionError("rbf_kernel: vectors differ in length");
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

std::vector<double> SvrModel::normalize(std::span<const double> raw) const {
  if (raw.size() != lo.size()) {
    throw DataError(fmt::format("SVR-{} expects {} features, got {}", to_string(features), lo.size(), raw.size()));
  }
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = span[i] > 0.0 ? (raw[i] - lo[i]) / span[i] : 0.0;
  return out;
}

double svr_decision(const SvrModel& model, std::span<const double> x) {
  double f = model.bias;
  for (std::size_t s = 0; s < model.coef.size(); ++s) {
    f += model.coef[s] * rbf_kernel(model.support.row(s), x, model.params.gamma);
  }
  return f;
}

double svr_predict(const SvrModel& model, const FeatureRecord& record) {
  const auto x = model.normalize(svr_features(record, model.features));
  return svr_decision(model, x);
}

std::vector<double> svr_predict(const SvrModel& model, const Dataset& ds) {
  std::vector<double> out;
  out.reserve(ds.size());
  for (const auto& r : ds) out.push_back(svr_predict(model, r));
  return out;
}

SvrFit svr_fit_normalized(const Matrix& x, std::span<const double> y, const SvrParams& params,
                          const SvrSolverOptions& options) {
  params.validate();
  if (x.rows() == 0) throw ContractError("svr_fit: empty training set");
  if (x.rows() != y.size()) throw DimensionError("svr_fit: row count differs from target count");
  const std::size_t l = x.rows();

  Matrix kernel(l, l);
  for (std::size_t i = 0; i < l; ++i) {
    kernel(i, i) = 1.0;
    for (std::size_t j = 0; j < i; ++j) {
      kernel(i, j) = kernel(j, i) = rbf_kernel(x.row(i), x.row(j), params.gamma);
    }
  }

  SmoSolver solver(kernel, y, params);
  if (!solver.solve(options)) {
    throw NumericError(fmt::format("SVR solver did not converge in {} iterations; KKT violation {} > {}",
                                   solver.iterations(), solver.violation(), options.tolerance));
  }

  SvrFit fit;
  fit.iterations = solver.iterations();
  fit.violation = solver.violation();
  fit.alpha.assign(solver.alpha().begin(), solver.alpha().begin() + static_cast<std::ptrdiff_t>(l));
  fit.alpha_star.assign(solver.alpha().begin() + static_cast<std::ptrdiff_t>(l), solver.alpha().end());

  SvrModel& m = fit.model;
  m.params = params;
  m.bias = -solver.rho();
  std::vector<std::size_t> sv;
  for (std::size_t i = 0; i < l; ++i) {
    if (fit.alpha[i] - fit.alpha_star[i] != 0.0) sv.push_back(i);
  }
  m.support = Matrix(sv.size(), x.cols());
  for (std::size_t s = 0; s < sv.size(); ++s) {
    std::copy(x.row(sv[s]).begin(), x.row(sv[s]).end(), m.support.row(s).begin());
    m.coef.push_back(fit.alpha[sv[s]] - fit.alpha_star[sv[s]]);
  }
  return fit;
}

SvrFit svr_fit(const Dataset& train, SvrFeatureSet features, const SvrParams& params,
               const SvrSolverOptions& options) {
  if (train.empty()) throw ContractError("svr_fit: empty training set");
  const Matrix raw = feature_matrix(train, features);
  std::vector<double> lo(raw.cols(), std::numeric_limits<double>::infinity());
  std::vector<double> hi(raw.cols(), -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < raw.rows(); ++r) {
    for (std::size_t c = 0; c < raw.cols(); ++c) {
      lo[c] = std::min(lo[c], raw(r, c));
      hi[c] = std::max(hi[c], raw(r, c));
    }
  }
  SvrModel stats;
  stats.features = features;
  stats.lo = lo;
  stats.span.resize(lo.size());
  for (std::size_t c = 0; c < lo.size(); ++c) stats.span[c] = hi[c] - lo[c];

  Matrix x(raw.rows(), raw.cols());
  for (std::size_t r = 0; r < raw.rows(); ++r) {
    const auto row = stats.normalize(raw.row(r));
    std::copy(row.begin(), row.end(), x.row(r).begin());
  }
  SvrFit fit = svr_fit_normalized(x, train.mos(), params, options);
  fit.model.features = features;
  fit.model.lo = std::move(stats.lo);
  fit.model.span = std::move(stats.span);
  return fit;
}

SvrGridResult svr_grid_search(const Dataset& train, const Dataset& validation, SvrFeatureSet features,
                              std::span<const double> Cs, std::span<const double> gammas, double epsilon,
                              const SvrSolverOptions& options) {
  if (Cs.empty() || gammas.empty()) throw ConfigError("SVR grid search needs at least one C and one gamma");
  if (validation.empty()) throw ContractError("SVR grid search: empty validation fold");
  SvrGridResult out;
  double best = std::numeric_limits<double>::infinity();
  const auto target = validation.mos();
  for (double C : Cs) {
    for (double gamma : gammas) {
      const SvrParams p{C, gamma, epsilon};
      const SvrFit fit = svr_fit(train, features, p, options);
      const double err = rmse(svr_predict(fit.model, validation), target);
      out.cells.push_back({C, gamma, err});
      if (err < best) {
        best = err;
        out.best = p;
      }
    }
  }
  return out;
}

nlohmann::json to_json(const SvrModel& model) {
  nlohmann::json sv = nlohmann::json::array();
  for (std::size_t s = 0; s < model.support.rows(); ++s) {
    const auto row = model.support.row(s);
    sv.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {
      {"config", std::string(to_string(model.features))},
      {"C", model.params.C},
      {"gamma", model.params.gamma},
      {"epsilon", model.params.epsilon},
      {"min", model.lo},
      {"span", model.span},
      {"support_vectors", sv},
      {"coefficients", model.coef},
      {"bias", model.bias},
  };
}

SvrModel svr_model_from_json(const nlohmann::json& j) {
  try {
    SvrModel m;
    m.features = parse_svr_features(j.at("config").get<std::string>());
    m.params = {j.at("C").get<double>(), j.at("gamma").get<double>(), j.at("epsilon").get<double>()};
    m.params.validate();
    m.lo = j.at("min").get<std::vector<double>>();
    m.span = j.at("span").get<std::vector<double>>();
    m.coef = j.at("coefficients").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    const auto& sv = j.at("support_vectors");
    const std::size_t d = feature_count(m.features);
    if (m.lo.size() != d || m.span.size() != d || sv.size() != m.coef.size()) {
      throw DataError("SVR model: inconsistent array lengths");
    }
    m.support = Matrix(sv.size(), d);
    for (std::size_t s = 0; s < sv.size(); ++s) {
      const auto row = sv[s].get<std::vector<double>>();
      if (row.size() != d) throw DataError("SVR model: support vector of wrong length");
      std::copy(row.begin(), row.end(), m.support.row(s).begin());
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("SVR model: ") + e.what());
  }
}

void save_svr_model(const SvrModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write SVR model " + path.string());
  out << to_json(model).dump(2) << '\n';
}

SvrModel load_svr_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read SVR model " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return svr_model_from_json(j);
}

}  // namespace avq
