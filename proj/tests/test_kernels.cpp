#include "doctest.h"

#include "fsvi/kernels.hpp"
#include "fsvi/parallel.hpp"
#include "fsvi/rng.hpp"

using namespace fsvi;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, RngKey key) {
  Matrix m(rows, cols);
  Rng rng(key);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

struct Instance {
  MlpSpec spec;
  ParamVector params;
  Matrix X;
};

Instance make_instance(std::vector<std::size_t> sizes, Activation act,
                       std::size_t n, std::uint64_t seed) {
  Instance inst{MlpSpec(std::move(sizes), act), {}, {}};
  inst.params = init_params(inst.spec, RngKey{seed}, InitScheme::UniformFanIn);
  inst.X = random_matrix(n, inst.spec.input_dim(), RngKey{seed + 1});
  return inst;
}

}  // namespace

TEST_CASE("parallel kernels match the serial reference bitwise") {
  const auto inst = make_instance({3, 17, 9, 2}, Activation::Tanh, 13, 7);
  std::vector<double> v(param_count(inst.spec));
  Rng rng(RngKey{11});
  for (auto& x : v) x = rng.normal();
  std::vector<double> cot(inst.X.rows() * inst.spec.output_dim());
  for (auto& x : cot) x = rng.normal();
  std::vector<double> diag(param_count(inst.spec));
  for (auto& x : diag) x = rng.uniform(0.1, 2.0);

  for (int nthreads : {1, 2, 4, 0}) {
    CAPTURE(nthreads);
    set_threads(nthreads);
    CHECK(kernels::forward_batch(inst.spec, inst.params.values, inst.X) ==
          kernels::ref::forward_batch(inst.spec, inst.params.values, inst.X));
    const Matrix J =
        kernels::param_jacobian_batch(inst.spec, inst.params.values, inst.X);
    CHECK(J == kernels::ref::param_jacobian_batch(inst.spec,
                                                  inst.params.values, inst.X));
    CHECK(kernels::last_hidden_batch(inst.spec, inst.params.values, inst.X) ==
          kernels::ref::last_hidden_batch(inst.spec, inst.params.values,
                                          inst.X));
    CHECK(kernels::jvp_batch(inst.spec, inst.params.values, inst.X, v) ==
          kernels::ref::jvp_batch(inst.spec, inst.params.values, inst.X, v));
    CHECK(kernels::vjp_batch(inst.spec, inst.params.values, inst.X, cot) ==
          kernels::ref::vjp_batch(inst.spec, inst.params.values, inst.X, cot));
    CHECK(kernels::scaled_gram(J, diag) == kernels::ref::scaled_gram(J, diag));
  }
  set_threads(0);
}

TEST_CASE("scaled_gram is exactly symmetric and dimension-checked") {
  const Matrix J = random_matrix(6, 4, RngKey{3});
  std::vector<double> s{0.5, 1.0, 2.0, 0.25};
  const Matrix C = kernels::scaled_gram(J, s);
  for (std::size_t r = 0; r < C.rows(); ++r)
    for (std::size_t c = 0; c < C.cols(); ++c) CHECK(C(r, c) == C(c, r));
  std::vector<double> bad{1.0, 2.0};
  CHECK_THROWS_AS(kernels::scaled_gram(J, bad), DimensionMismatch);
}

TEST_CASE("results do not depend on the thread cap") {
  const auto inst = make_instance({2, 31, 3}, Activation::Relu, 29, 21);
  set_threads(1);
  const Matrix serial =
      kernels::param_jacobian_batch(inst.spec, inst.params.values, inst.X);
  set_threads(0);
  const Matrix parallel =
      kernels::param_jacobian_batch(inst.spec, inst.params.values, inst.X);
  CHECK(serial == parallel);
}
