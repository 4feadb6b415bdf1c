#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fsvi/gaussian.hpp"
#include "fsvi/network.hpp"

namespace fsvi {

enum class LinearizationMode { Exact, McPartition };

struct LinearizationConfig {
  LinearizationMode mode = LinearizationMode::McPartition;
  std::size_t samples = 1;  // R
  Partition partition;

  void validate(const MlpSpec& spec) const;
};

LinearizationConfig default_linearization(const MlpSpec& spec,
                                          std::size_t samples = 1);

// Gaussian over f at X induced by pushing g through the network linearized
// about `lin_point` (g.mean when omitted):
//   mean = f(X; z) + J(X; z) (g.mean - z),  cov = J(X; z) diag(g.var) J^T.
FunctionGaussian push_forward_exact(
    const DiagonalGaussian& g, const MlpSpec& spec, const Matrix& X,
    std::span<const double> lin_point = {});

// Prop-2 style estimator: R equally weighted Gaussian components. Component
// j samples the alpha block (all layers but the last) and keeps the final
// layer in closed form:
//   mean_j = f(X; z) + J(X; z) d_j,
//     d_j  = (theta_alpha^(j) - z_alpha, g.mean_beta - z_beta),
//     theta_alpha^(j) ~ N(g.mean_alpha, diag(g.var_alpha))
//   cov   = J_beta(X; z) diag(g.var_beta) J_beta^T   (shared)
// The J d_j products are evaluated as directional derivatives; only the
// final-layer Jacobian is materialized. Component j draws from derive(key, j)
// so components are order-stable and may be computed in parallel.
std::vector<FunctionGaussian> push_forward_mc(
    const DiagonalGaussian& g, const MlpSpec& spec, const Matrix& X,
    const LinearizationConfig& config, RngKey key,
    std::span<const double> lin_point = {});

}  // namespace fsvi
