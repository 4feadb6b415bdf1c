#include "fsvi/kernels.hpp"

#include "fsvi/network_rowops.hpp"
#include "fsvi/parallel.hpp"

namespace fsvi::kernels {

namespace detail {

inline void forward_into(const MlpSpec& spec, std::span<const double> params,
                         const Matrix& X, std::size_t i, Matrix& out) {
  auto cache = rowops::forward_row<double>(spec, params, X.row(i));
  const auto& f = cache.post.back();
  for (std::size_t q = 0; q < f.size(); ++q) out(i, q) = f[q];
}

inline void jacobian_rows_into(const MlpSpec& spec,
                               std::span<const double> params, const Matrix& X,
                               std::size_t i, Matrix& J) {
  const std::size_t Q = spec.output_dim();
  auto cache = rowops::forward_row<double>(spec, params, X.row(i));
  std::vector<double> cot(Q, 0.0);
  for (std::size_t q = 0; q < Q; ++q) {
    cot.assign(Q, 0.0);
    cot[q] = 1.0;
    auto row = J.row(i * Q + q);
    for (auto& g : row) g = 0.0;
    rowops::backward_row_cotangent<double>(spec, params, cache, cot, row);
  }
}

inline void last_hidden_into(const MlpSpec& spec,
                             std::span<const double> params, const Matrix& X,
                             std::size_t i, Matrix& H) {
  auto cache = rowops::forward_row<double>(spec, params, X.row(i));
  const auto& h = cache.post[spec.num_layers() - 1];
  for (std::size_t j = 0; j < h.size(); ++j) H(i, j) = h[j];
}

inline void jvp_into(const MlpSpec& spec, std::span<const double> params,
                     const Matrix& X, std::span<const double> v, std::size_t i,
                     std::vector<double>& out) {
  const std::size_t Q = spec.output_dim();
  auto cache = rowops::forward_row<double>(spec, params, X.row(i));
  auto tangent = rowops::jvp_row<double>(spec, params, cache, v);
  for (std::size_t q = 0; q < Q; ++q) out[i * Q + q] = tangent[q];
}

inline void vjp_row_into(const MlpSpec& spec, std::span<const double> params,
                         const Matrix& X, std::span<const double> cotangent,
                         std::size_t i, std::span<double> grad) {
  const std::size_t Q = spec.output_dim();
  auto cache = rowops::forward_row<double>(spec, params, X.row(i));
  rowops::backward_row_cotangent<double>(
      spec, params, cache, cotangent.subspan(i * Q, Q), grad);
}

inline void gram_row_into(const Matrix& J, std::span<const double> s,
                          std::size_t r, Matrix& C) {
  const std::size_t P = J.cols();
  for (std::size_t c = r; c < J.rows(); ++c) {
    double acc = 0.0;
    const double* a = J.data() + r * P;
    const double* b = J.data() + c * P;
    for (std::size_t p = 0; p < P; ++p) acc += a[p] * s[p] * b[p];
    C(r, c) = acc;
    C(c, r) = acc;
  }
}

}  // namespace detail

Matrix forward_batch(const MlpSpec& spec, std::span<const double> params,
                     const Matrix& X) {
  Matrix out(X.rows(), spec.output_dim());
  parallel_rows(X.rows(), [&](std::size_t i) {
    detail::forward_into(spec, params, X, i, out);
  });
  return out;
}

Matrix param_jacobian_batch(const MlpSpec& spec,
                            std::span<const double> params, const Matrix& X) {
  Matrix J(X.rows() * spec.output_dim(), params.size());
  parallel_rows(X.rows(), [&](std::size_t i) {
    detail::jacobian_rows_into(spec, params, X, i, J);
  });
  return J;
}

Matrix last_hidden_batch(const MlpSpec& spec, std::span<const double> params,
                         const Matrix& X) {
  Matrix H(X.rows(), spec.last_hidden_dim());
  parallel_rows(X.rows(), [&](std::size_t i) {
    detail::last_hidden_into(spec, params, X, i, H);
  });
  return H;
}

std::vector<double> jvp_batch(const MlpSpec& spec,
                              std::span<const double> params, const Matrix& X,
                              std::span<const double> v) {
  std::vector<double> out(X.rows() * spec.output_dim());
  parallel_rows(X.rows(), [&](std::size_t i) {
    detail::jvp_into(spec, params, X, v, i, out);
  });
  return out;
}

std::vector<double> vjp_batch(const MlpSpec& spec,
                              std::span<const double> params, const Matrix& X,
                              std::span<const double> cotangent) {
  const std::size_t N = X.rows();
  const std::size_t P = params.size();
  Matrix per_row(N, P);
  parallel_rows(N, [&](std::size_t i) {
    detail::vjp_row_into(spec, params, X, cotangent, i, per_row.row(i));
  });
  // Fixed-order reduction keeps the result independent of the thread count.
  std::vector<double> grad(P, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    const double* r = per_row.data() + i * P;
    for (std::size_t p = 0; p < P; ++p) grad[p] += r[p];
  }
  return grad;
}

Matrix scaled_gram(const Matrix& J, std::span<const double> s) {
  if (J.cols() != s.size())
    throw DimensionMismatch("scaled_gram: diagonal length != J columns");
  Matrix C(J.rows(), J.rows());
  parallel_rows(J.rows(),
                [&](std::size_t r) { detail::gram_row_into(J, s, r, C); });
  return C;
}

namespace ref {

Matrix forward_batch(const MlpSpec& spec, std::span<const double> params,
                     const Matrix& X) {
  Matrix out(X.rows(), spec.output_dim());
  for (std::size_t i = 0; i < X.rows(); ++i)
    detail::forward_into(spec, params, X, i, out);
  return out;
}

Matrix param_jacobian_batch(const MlpSpec& spec,
                            std::span<const double> params, const Matrix& X) {
  Matrix J(X.rows() * spec.output_dim(), params.size());
  for (std::size_t i = 0; i < X.rows(); ++i)
    detail::jacobian_rows_into(spec, params, X, i, J);
  return J;
}

Matrix last_hidden_batch(const MlpSpec& spec, std::span<const double> params,
                         const Matrix& X) {
  Matrix H(X.rows(), spec.last_hidden_dim());
  for (std::size_t i = 0; i < X.rows(); ++i)
    detail::last_hidden_into(spec, params, X, i, H);
  return H;
}

std::vector<double> jvp_batch(const MlpSpec& spec,
                              std::span<const double> params, const Matrix& X,
                              std::span<const double> v) {
  std::vector<double> out(X.rows() * spec.output_dim());
  for (std::size_t i = 0; i < X.rows(); ++i)
    detail::jvp_into(spec, params, X, v, i, out);
  return out;
}

std::vector<double> vjp_batch(const MlpSpec& spec,
                              std::span<const double> params, const Matrix& X,
                              std::span<const double> cotangent) {
  std::vector<double> grad(params.size(), 0.0);
  for (std::size_t i = 0; i < X.rows(); ++i)
    detail::vjp_row_into(spec, params, X, cotangent, i, grad);
  return grad;
}

Matrix scaled_gram(const Matrix& J, std::span<const double> s) {
  if (J.cols() != s.size())
    throw DimensionMismatch("scaled_gram: diagonal length != J columns");
  Matrix C(J.rows(), J.rows());
  for (std::size_t r = 0; r < J.rows(); ++r)
    detail::gram_row_into(J, s, r, C);
  return C;
}

}  // namespace ref
}  // namespace fsvi::kernels
