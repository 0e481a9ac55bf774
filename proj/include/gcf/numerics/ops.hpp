#pragma once

#include <cstddef>
#include <vector>

#include "gcf/numerics/tape.hpp"

// Differentiable operations on rank-2 tape values. Broadcasting is limited to
// a 1x1 scalar against any shape and a 1xN row added across the rows of an
// MxN operand.
namespace gcf::num {

inline constexpr double kLayerNormEps = 1e-5;
// Additive score offset that zeroes a softmax weight exactly.
inline constexpr double kMaskedScore = -1e30;

Var matmul(Var a, Var b);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var tanh(Var a);
Var sigmoid(Var a);

// Softmax along axis 0 (down columns) or 1 (along rows), max-subtracted.
// NaN inputs raise NumericError.
Var softmax(Var a, int axis);
Var log_softmax(Var a, int axis);

// Row-wise normalization over the last axis followed by gain*x + bias, with
// gain and bias given as 1xD rows.
Var layer_norm(Var x, Var gain, Var bias);

// x*W + b with b a 1xN row.
Var linear(Var x, Var w, Var b);

Var sum(Var a);
Var mean(Var a);
// Sum over the last axis: [M x N] -> [M x 1].
Var row_sum(Var a);
Var transpose(Var a);
Var concat_cols(const std::vector<Var>& parts);
Var gather_rows(Var a, const std::vector<std::size_t>& rows);
// Multiplies row i of `a` by w(i, 0); w is [M x 1].
Var scale_rows(Var a, Var w);
Var reshape(Var a, std::size_t rows, std::size_t cols);
// Elementwise Huber-style penalty with transition at |e| = 1.
Var smooth_l1(Var e);

}  // namespace gcf::num
