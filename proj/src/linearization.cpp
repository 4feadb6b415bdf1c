#include "fsvi/linearization.hpp"

#include <cmath>

#include "fsvi/errors.hpp"
#include "fsvi/kernels.hpp"
#include "fsvi/parallel.hpp"

namespace fsvi {

void LinearizationConfig::validate(const MlpSpec& spec) const {
  if (samples < 1)
    throw ConfigError("LinearizationConfig: samples must be >= 1");
  if (mode == LinearizationMode::McPartition &&
      partition.total() != param_count(spec))
    throw DimensionMismatch("LinearizationConfig: partition does not cover "
                            "the parameter vector");
}

LinearizationConfig default_linearization(const MlpSpec& spec,
                                          std::size_t samples) {
  LinearizationConfig cfg;
  cfg.mode = LinearizationMode::McPartition;
  cfg.samples = samples;
  cfg.partition = final_layer_partition(spec);
  return cfg;
}

namespace {
ParamVector resolve_point(const DiagonalGaussian& g,
                          std::span<const double> lin_point) {
  if (lin_point.empty()) return ParamVector{g.mean};
  if (lin_point.size() != g.dim())
    throw DimensionMismatch("linearization point has wrong length");
  return ParamVector{{lin_point.begin(), lin_point.end()}};
}
}  // namespace

FunctionGaussian push_forward_exact(const DiagonalGaussian& g,
                                    const MlpSpec& spec, const Matrix& X,
                                    std::span<const double> lin_point) {
  if (g.dim() != param_count(spec))
    throw DimensionMismatch("push_forward_exact: distribution/spec mismatch");
  const ParamVector z = resolve_point(g, lin_point);
  const Matrix J = param_jacobian(spec, z, X);
  const Matrix f = forward(spec, z, X);

  std::vector<double> mean(f.storage());
  if (!lin_point.empty()) {
    std::vector<double> shift(g.dim());
    for (std::size_t i = 0; i < g.dim(); ++i)
      shift[i] = g.mean[i] - z.values[i];
    const auto jshift = kernels::jvp_batch(spec, z.values, X, shift);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += jshift[i];
  }
  return FunctionGaussian(std::move(mean),
                          kernels::scaled_gram(J, g.variance));
}

std::vector<FunctionGaussian> push_forward_mc(
    const DiagonalGaussian& g, const MlpSpec& spec, const Matrix& X,
    const LinearizationConfig& config, RngKey key,
    std::span<const double> lin_point) {
  if (g.dim() != param_count(spec))
    throw DimensionMismatch("push_forward_mc: distribution/spec mismatch");
  config.validate(spec);
  const std::size_t alpha = config.partition.alpha_count;
  const std::size_t P = g.dim();
  const ParamVector z = resolve_point(g, lin_point);

  const Matrix J_beta = final_layer_jacobian(spec, z, X);
  std::vector<double> beta_var(g.variance.begin() + alpha, g.variance.end());
  const Matrix cov = kernels::scaled_gram(J_beta, beta_var);
  const Matrix f = forward(spec, z, X);

  std::vector<FunctionGaussian> components(config.samples);
  kernels::parallel_rows(config.samples, [&](std::size_t j) {
    Rng rng(derive(key, j));
    std::vector<double> d(P);
    for (std::size_t i = 0; i < alpha; ++i) {
      const double theta =
          g.mean[i] + std::sqrt(g.variance[i]) * rng.normal();
      d[i] = theta - z.values[i];
    }
    for (std::size_t i = alpha; i < P; ++i) d[i] = g.mean[i] - z.values[i];
    const auto jd = kernels::jvp_batch(spec, z.values, X, d);
    std::vector<double> mean(f.storage());
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += jd[i];
    components[j] = FunctionGaussian(std::move(mean), cov);
  });
  return components;
}

}  // namespace fsvi
