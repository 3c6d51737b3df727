#include "avq/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace avq {
namespace {

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape() + " vs " + b.shape());
  }
}

template <class F>
Matrix map(const Matrix& m, F f) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = f(m[i]);
  return out;
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "gelu") return Activation::gelu;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(name) + "' (expected gelu, relu or tanh)");
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::gelu: return "gelu";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "gelu";
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double gelu(double x) { return x * normal_cdf(x); }

double gelu_derivative(double x) {
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return normal_cdf(x) + x * pdf;
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto in = m.row(r);
    auto o = out.row(r);
    if (in.empty()) continue;
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      total += o[c];
    }
    for (double& v : o) v /= total;
  }
  return out;
}

Var matmul(Var a, Var b) {
  Matrix out = avq::matmul(a.value(), b.value());
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, matmul_nt(g, b.value()));
    if (b.requires_grad()) t.accumulate(b, matmul_tn(a.value(), g));
  });
}

Var linear(Var x, Var weight, Var bias) {
  const Matrix& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != weight.value().cols()) {
    throw DimensionError("linear: bias " + bv.shape() + " incompatible with weight " +
                         weight.value().shape());
  }
  Matrix out = avq::matmul(x.value(), weight.value());
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv[c];
  }
  return x.tape().record(std::move(out), {x, weight, bias}, [x, weight, bias](Tape& t, const Matrix& g) {
    if (x.requires_grad()) t.accumulate(x, matmul_nt(g, weight.value()));
    if (weight.requires_grad()) t.accumulate(weight, matmul_tn(x.value(), g));
    if (bias.requires_grad()) {
      Matrix gb(1, g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r) {
        auto row = g.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) gb[c] += row[c];
      }
      t.accumulate(bias, std::move(gb));
    }
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a.value(), b.value());
  return a.tape().record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a.value(), b.value());
  return a.tape().record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g * -1.0);
  });
}

Var hadamard(Var a, Var b) {
  require_same_shape("hadamard", a.value(), b.value());
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (a.requires_grad()) {
      Matrix ga = g;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= b.value()[i];
      t.accumulate(a, std::move(ga));
    }
    if (b.requires_grad()) {
      Matrix gb = g;
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= a.value()[i];
      t.accumulate(b, std::move(gb));
    }
  });
}

Var scale(Var a, double s) {
  return a.tape().record(a.value() * s, {a}, [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return a.tape().record(Matrix(1, 1, total), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix(a.rows(), a.cols(), g[0]));
  });
}

Var gelu(Var a) {
  return a.tape().record(map(a.value(), [](double x) { return gelu(x); }), {a},
                         [a](Tape& t, const Matrix& g) {
                           Matrix ga = map(a.value(), gelu_derivative);
                           for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= g[i];
                           t.accumulate(a, std::move(ga));
                         });
}

Var relu(Var a) {
  return a.tape().record(map(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }), {a},
                         [a](Tape& t, const Matrix& g) {
                           Matrix ga = g;
                           for (std::size_t i = 0; i < ga.size(); ++i)
                             if (a.value()[i] <= 0.0) ga[i] = 0.0;
                           t.accumulate(a, std::move(ga));
                         });
}

Var tanh(Var a) {
  Matrix out = map(a.value(), [](double x) { return std::tanh(x); });
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    Matrix ga = g;
    for (std::size_t i = 0; i < ga.size(); ++i) {
      const double y = std::tanh(a.value()[i]);
      ga[i] *= 1.0 - y * y;
    }
    t.accumulate(a, std::move(ga));
  });
}

Var activate(Var a, Activation act) {
  switch (act) {
    case Activation::gelu: return gelu(a);
    case Activation::relu: return relu(a);
    case Activation::tanh: return tanh(a);
  }
  return gelu(a);
}

Var softmax_rows(Var a) {
  return a.tape().record(softmax_rows(a.value()), {a}, [a](Tape& t, const Matrix& g) {
    Matrix probs = softmax_rows(a.value());
    Matrix ga(g.rows(), g.cols());
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto pr = probs.row(r);
      auto gr = g.row(r);
      double dot = 0.0;
      for (std::size_t c = 0; c < pr.size(); ++c) dot += pr[c] * gr[c];
      auto out = ga.row(r);
      for (std::size_t c = 0; c < pr.size(); ++c) out[c] = pr[c] * (gr[c] - dot);
    }
    t.accumulate(a, std::move(ga));
  });
}

Var dropout(Var a, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::eval || rate == 0.0) return a;
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix mask(a.rows(), a.cols());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.bernoulli(rate) ? 0.0 : keep_scale;
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return a.tape().record(std::move(out), {a}, [a, mask = std::move(mask)](Tape& t, const Matrix& g) {
    Matrix ga = g;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= mask[i];
    t.accumulate(a, std::move(ga));
  });
}

Var concat_cols(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows()) {
    throw DimensionError("concat_cols: row mismatch " + av.shape() + " vs " + bv.shape());
  }
  Matrix out(av.rows(), av.cols() + bv.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy(av.row(r).begin(), av.row(r).end(), out.row(r).begin());
    std::copy(bv.row(r).begin(), bv.row(r).end(), out.row(r).begin() + av.cols());
  }
  const std::size_t split = av.cols();
  return a.tape().record(std::move(out), {a, b}, [a, b, split](Tape& t, const Matrix& g) {
    if (a.requires_grad()) {
      Matrix ga(g.rows(), split);
      for (std::size_t r = 0; r < g.rows(); ++r)
        std::copy_n(g.row(r).begin(), split, ga.row(r).begin());
      t.accumulate(a, std::move(ga));
    }
    if (b.requires_grad()) {
      Matrix gb(g.rows(), g.cols() - split);
      for (std::size_t r = 0; r < g.rows(); ++r)
        std::copy(g.row(r).begin() + split, g.row(r).end(), gb.row(r).begin());
      t.accumulate(b, std::move(gb));
    }
  });
}

Var mean_segments(Var a, std::size_t segment) {
  const Matrix& av = a.value();
  if (segment == 0 || av.rows() % segment != 0) {
    throw DimensionError("mean_segments: " + std::to_string(av.rows()) +
                         " rows not divisible by segment " + std::to_string(segment));
  }
  if (segment == 1) return a;
  const std::size_t groups = av.rows() / segment;
  Matrix out(groups, av.cols());
  for (std::size_t s = 0; s < groups; ++s) {
    auto o = out.row(s);
    for (std::size_t i = 0; i < segment; ++i) {
      auto in = av.row(s * segment + i);
      for (std::size_t c = 0; c < o.size(); ++c) o[c] += in[c];
    }
    for (double& v : o) v /= static_cast<double>(segment);
  }
  return a.tape().record(std::move(out), {a}, [a, segment](Tape& t, const Matrix& g) {
    Matrix ga(a.rows(), a.cols());
    const double w = 1.0 / static_cast<double>(segment);
    for (std::size_t r = 0; r < ga.rows(); ++r) {
      auto gr = g.row(r / segment);
      auto o = ga.row(r);
      for (std::size_t c = 0; c < o.size(); ++c) o[c] = gr[c] * w;
    }
    t.accumulate(a, std::move(ga));
  });
}

Var attention(Var q, Var k, Var v, std::size_t heads, std::size_t segment) {
  const Matrix& qv = q.value();
  const Matrix& kv = k.value();
  const Matrix& vv = v.value();
  if (!qv.same_shape(kv) || !qv.same_shape(vv)) {
    throw DimensionError("attention: q " + qv.shape() + ", k " + kv.shape() + ", v " + vv.shape() +
                         " must share a shape");
  }
  if (heads == 0 || qv.cols() % heads != 0) {
    throw ConfigError("attention: width " + std::to_string(qv.cols()) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (segment == 0 || qv.rows() % segment != 0) {
    throw DimensionError("attention: " + std::to_string(qv.rows()) +
                         " rows not divisible by sequence length " + std::to_string(segment));
  }
  const std::size_t n = segment;
  const std::size_t seqs = qv.rows() / n;
  const std::size_t dk = qv.cols() / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));

  // probs[((s * heads) + h) * n * n + i * n + j]
  std::vector<double> probs(seqs * heads * n * n);
  Matrix out(qv.rows(), qv.cols());
  Matrix scores(n, n);
  for (std::size_t s = 0; s < seqs; ++s) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t c0 = h * dk;
      for (std::size_t i = 0; i < n; ++i) {
        auto qi = qv.row(s * n + i).subspan(c0, dk);
        for (std::size_t j = 0; j < n; ++j) {
          auto kj = kv.row(s * n + j).subspan(c0, dk);
          double dot = 0.0;
          for (std::size_t c = 0; c < dk; ++c) dot += qi[c] * kj[c];
          scores(i, j) = dot * inv_sqrt;
        }
      }
      Matrix p = softmax_rows(scores);
      std::copy(p.data().begin(), p.data().end(), probs.begin() + ((s * heads) + h) * n * n);
      for (std::size_t i = 0; i < n; ++i) {
        auto oi = out.row(s * n + i).subspan(c0, dk);
        for (std::size_t j = 0; j < n; ++j) {
          const double w = p(i, j);
          auto vj = vv.row(s * n + j).subspan(c0, dk);
          for (std::size_t c = 0; c < dk; ++c) oi[c] += w * vj[c];
        }
      }
    }
  }

  return q.tape().record(
      std::move(out), {q, k, v},
      [q, k, v, heads, n, seqs, dk, inv_sqrt, probs = std::move(probs)](Tape& t, const Matrix& g) {
        const Matrix& qv = q.value();
        const Matrix& kv = k.value();
        const Matrix& vv = v.value();
        Matrix gq(qv.rows(), qv.cols());
        Matrix gk(kv.rows(), kv.cols());
        Matrix gv(vv.rows(), vv.cols());
        std::vector<double> dp(n * n);
        std::vector<double> ds(n * n);
        for (std::size_t s = 0; s < seqs; ++s) {
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t c0 = h * dk;
            const double* p = probs.data() + ((s * heads) + h) * n * n;
            // dV_j += sum_i P_ij dO_i ; dP_ij = dO_i . V_j
            for (std::size_t i = 0; i < n; ++i) {
              auto gi = g.row(s * n + i).subspan(c0, dk);
              for (std::size_t j = 0; j < n; ++j) {
                auto vj = vv.row(s * n + j).subspan(c0, dk);
                auto gvj = gv.row(s * n + j).subspan(c0, dk);
                double dot = 0.0;
                for (std::size_t c = 0; c < dk; ++c) {
                  gvj[c] += p[i * n + j] * gi[c];
                  dot += gi[c] * vj[c];
                }
                dp[i * n + j] = dot;
              }
            }
            // dS = P * (dP - rowsum(dP * P))
            for (std::size_t i = 0; i < n; ++i) {
              double rowdot = 0.0;
              for (std::size_t j = 0; j < n; ++j) rowdot += dp[i * n + j] * p[i * n + j];
              for (std::size_t j = 0; j < n; ++j) ds[i * n + j] = p[i * n + j] * (dp[i * n + j] - rowdot);
            }
            for (std::size_t i = 0; i < n; ++i) {
              auto qi = qv.row(s * n + i).subspan(c0, dk);
              auto gqi = gq.row(s * n + i).subspan(c0, dk);
              for (std::size_t j = 0; j < n; ++j) {
                const double w = ds[i * n + j] * inv_sqrt;
                if (w == 0.0) continue;
                auto kj = kv.row(s * n + j).subspan(c0, dk);
                auto gkj = gk.row(s * n + j).subspan(c0, dk);
                for (std::size_t c = 0; c < dk; ++c) {
                  gqi[c] += w * kj[c];
                  gkj[c] += w * qi[c];
                }
              }
            }
          }
        }
        if (q.requires_grad()) t.accumulate(q, std::move(gq));
        if (k.requires_grad()) t.accumulate(k, std::move(gk));
        if (v.requires_grad()) t.accumulate(v, std::move(gv));
      });
}

}  // namespace avq
