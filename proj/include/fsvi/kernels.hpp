#pragma once

// Batch-level numeric kernels. Each kernel exists twice: the production
// version parallelizes over independent rows with OpenMP, and fsvi::ref
// keeps a plain serial loop for testing and benchmarking. Row outputs are
// disjoint and inner accumulations run in a fixed order, so the two variants
// (and any thread count) produce bitwise-identical results.

#include <span>
#include <vector>

#include "fsvi/matrix.hpp"
#include "fsvi/network.hpp"

namespace fsvi::kernels {

Matrix forward_batch(const MlpSpec& spec, std::span<const double> params,
                     const Matrix& X);

Matrix param_jacobian_batch(const MlpSpec& spec, std::span<const double> params,
                            const Matrix& X);

Matrix last_hidden_batch(const MlpSpec& spec, std::span<const double> params,
                         const Matrix& X);

std::vector<double> jvp_batch(const MlpSpec& spec,
                              std::span<const double> params, const Matrix& X,
                              std::span<const double> v);

// Per-row gradients are computed in parallel and reduced in row order.
std::vector<double> vjp_batch(const MlpSpec& spec,
                              std::span<const double> params, const Matrix& X,
                              std::span<const double> cotangent);

// J diag(s) J^T for a (k x P) matrix J; the result is exactly symmetric.
Matrix scaled_gram(const Matrix& J, std::span<const double> s);

namespace ref {

Matrix forward_batch(const MlpSpec& spec, std::span<const double> params,
                     const Matrix& X);
Matrix param_jacobian_batch(const MlpSpec& spec, std::span<const double> params,
                            const Matrix& X);
Matrix last_hidden_batch(const MlpSpec& spec, std::span<const double> params,
                         const Matrix& X);
std::vector<double> jvp_batch(const MlpSpec& spec,
                              std::span<const double> params, const Matrix& X,
                              std::span<const double> v);
std::vector<double> vjp_batch(const MlpSpec& spec,
                              std::span<const double> params, const Matrix& X,
                              std::span<const double> cotangent);
Matrix scaled_gram(const Matrix& J, std::span<const double> s);

}  // namespace ref
}  // namespace fsvi::kernels
