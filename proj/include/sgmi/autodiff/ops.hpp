#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sgmi/autodiff/tape.hpp"

// Differentiable operations. Binary element-wise ops broadcast over matrix
// dimensions of size 1 (scalars, 1 x n rows, m x 1 columns).
namespace sgmi::ad {

Var matmul(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);

Var relu(Var a);
Var softplus(Var a);
Var log(Var a);
Var exp(Var a);

// Row-wise softmax with max shift; each output row sums to 1.
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);

// Concatenates matrices with equal column counts along rows.
Var stack_rows(std::span<const Var> parts);
Var gather_rows(Var a, std::span<const std::size_t> indices);
// out[indices[i]] += a[i]; out has `size` rows.
Var scatter_add_rows(Var a, std::span<const std::size_t> indices, std::size_t size);
// Sums rows sharing a segment id; out has `num_segments` rows.
Var row_sum_segments(Var a, std::span<const std::size_t> segment_ids, std::size_t num_segments);

// Column j as an m x 1 matrix.
Var column(Var a, std::size_t j);
Var reshape(Var a, Shape shape);

// Full reductions to a rank-0 scalar.
Var sum(Var a);
Var mean(Var a);

// Plain kernels shared with non-differentiable code paths.
Tensor matmul_values(const Tensor& a, const Tensor& b);
double softplus_value(double x);
double sigmoid_value(double x);

}  // namespace sgmi::ad
