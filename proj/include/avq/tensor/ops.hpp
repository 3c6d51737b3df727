#pragma once

#include <cstddef>
#include <string_view>

#include "avq/tensor/matrix.hpp"
#include "avq/tensor/rng.hpp"
#include "avq/tensor/tape.hpp"

namespace avq {

enum class Mode { train, eval };

enum class Activation { gelu, relu, tanh };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);

// Scalar and value-level helpers shared by the tape ops and their tests.
double normal_cdf(double x);
double gelu(double x);
double gelu_derivative(double x);
Matrix softmax_rows(const Matrix& m);

// Differentiable primitives. Each records one node with an analytic backward.
Var matmul(Var a, Var b);
/// x * weight + bias, with a 1 x out bias broadcast over rows.
Var linear(Var x, Var weight, Var bias);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
Var sum(Var a);
Var gelu(Var a);
Var relu(Var a);
Var tanh(Var a);
Var activate(Var a, Activation act);
Var softmax_rows(Var a);
/// Inverted dropout: in train mode each entry is zeroed with probability
/// `rate` and survivors are scaled by 1/(1-rate). Identity in eval mode.
/// ConfigError unless 0 <= rate < 1.
Var dropout(Var a, double rate, Mode mode, Rng& rng);
Var concat_cols(Var a, Var b);
/// Averages consecutive blocks of `segment` rows: [(B*segment) x d] -> [B x d].
Var mean_segments(Var a, std::size_t segment);

/// Multi-head scaled dot-product attention over independent sequences.
/// q, k, v are [(B*segment) x d]; rows [s*segment, (s+1)*segment) form
/// sequence s. Columns are split into `heads` contiguous groups of d/heads.
/// Returns the concatenated per-head outputs softmax(Q_h K_h^T / sqrt(d_k)) V_h
/// (no output projection).
Var attention(Var q, Var k, Var v, std::size_t heads, std::size_t segment);

}  // namespace avq
