#include "fsvi/predictive.hpp"

#include <cmath>

#include "fsvi/errors.hpp"

namespace fsvi {

namespace {
constexpr double kTwoPiE = 17.0794684453471341;  // 2*pi*e
}

PredictiveOutput posterior_predictive(const VariationalPosterior& q,
                                      const MlpSpec& spec, const Matrix& X,
                                      const Likelihood& lik,
                                      std::size_t draws, RngKey key) {
  if (draws == 0) throw ConfigError("posterior_predictive: draws must be >= 1");
  if (X.cols() != spec.input_dim())
    throw DimensionMismatch("posterior_predictive: input width mismatch");
  const std::size_t N = X.rows();
  const std::size_t Q = spec.output_dim();
  const std::size_t P = q.dim();
  const auto sig = q.sigma();

  PredictiveOutput out;
  out.classification = std::holds_alternative<CategoricalSoftmax>(lik);
  out.mean = Matrix(N, Q);
  out.entropy.assign(N, 0.0);

  ParamVector theta;
  theta.values.resize(P);
  const double inv_m = 1.0 / static_cast<double>(draws);

  if (out.classification) {
    for (std::size_t j = 0; j < draws; ++j) {
      const auto eps = standard_normals(derive(key, j), P);
      for (std::size_t i = 0; i < P; ++i)
        theta.values[i] = q.mu[i] + sig[i] * eps[i];
      const Matrix f = forward(spec, theta, X);
      for (std::size_t i = 0; i < N; ++i) {
        double mx = f(i, 0);
        for (std::size_t c = 1; c < Q; ++c) mx = std::max(mx, f(i, c));
        double lse = 0.0;
        for (std::size_t c = 0; c < Q; ++c) lse += std::exp(f(i, c) - mx);
        for (std::size_t c = 0; c < Q; ++c)
          out.mean(i, c) += inv_m * std::exp(f(i, c) - mx) / lse;
      }
    }
    for (std::size_t i = 0; i < N; ++i) {
      double h = 0.0;
      for (std::size_t c = 0; c < Q; ++c) {
        const double p = out.mean(i, c);
        if (p > 0.0) h -= p * std::log(p);
      }
      out.entropy[i] = h;
    }
    return out;
  }

  const double noise = std::get<GaussianRegression>(lik).noise_variance;
  out.variance = Matrix(N, Q);
  Matrix sum(N, Q), sum_sq(N, Q);
  for (std::size_t j = 0; j < draws; ++j) {
    const auto eps = standard_normals(derive(key, j), P);
    for (std::size_t i = 0; i < P; ++i)
      theta.values[i] = q.mu[i] + sig[i] * eps[i];
    const Matrix f = forward(spec, theta, X);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t c = 0; c < Q; ++c) {
        sum(i, c) += f(i, c);
        sum_sq(i, c) += f(i, c) * f(i, c);
      }
  }
  for (std::size_t i = 0; i < N; ++i) {
    double h = 0.0;
    for (std::size_t c = 0; c < Q; ++c) {
      const double m = sum(i, c) * inv_m;
      double between = sum_sq(i, c) * inv_m - m * m;
      if (between < 0.0) between = 0.0;  // round-off
      out.mean(i, c) = m;
      out.variance(i, c) = noise + between;
      h += 0.5 * std::log(kTwoPiE * out.variance(i, c));
    }
    out.entropy[i] = h;
  }
  return out;
}

}  // namespace fsvi
