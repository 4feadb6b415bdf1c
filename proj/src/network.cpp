#include "fsvi/network.hpp"

#include <cmath>

#include "fsvi/kernels.hpp"

namespace fsvi {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh:
      return "tanh";
    case Activation::Relu:
      return "relu";
    case Activation::Identity:
      return "identity";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  if (s == "identity") return Activation::Identity;
  throw ConfigError("unknown activation: " + s);
}

MlpSpec::MlpSpec(std::vector<std::size_t> sizes, Activation uniform_hidden)
    : layer_sizes(std::move(sizes)) {
  if (layer_sizes.size() >= 2)
    hidden_activations.assign(layer_sizes.size() - 2, uniform_hidden);
  validate();
}

MlpSpec::MlpSpec(std::vector<std::size_t> sizes, std::vector<Activation> hidden)
    : layer_sizes(std::move(sizes)), hidden_activations(std::move(hidden)) {
  validate();
}

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2)
    throw ConfigError("MlpSpec needs at least input and output sizes");
  for (auto s : layer_sizes)
    if (s == 0) throw ConfigError("MlpSpec layer sizes must be positive");
  if (hidden_activations.size() != layer_sizes.size() - 2)
    throw ConfigError("MlpSpec needs one activation per hidden layer");
}

std::size_t param_count(const MlpSpec& spec) {
  std::size_t p = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l)
    p += (spec.layer_sizes[l] + 1) * spec.layer_sizes[l + 1];
  return p;
}

std::size_t layer_offset(const MlpSpec& spec, std::size_t layer) {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l)
    off += (spec.layer_sizes[l] + 1) * spec.layer_sizes[l + 1];
  return off;
}

std::size_t layer_param_count(const MlpSpec& spec, std::size_t layer) {
  return (spec.layer_sizes[layer] + 1) * spec.layer_sizes[layer + 1];
}

std::vector<LayerParams> to_layers(const MlpSpec& spec, const ParamVector& p) {
  if (p.size() != param_count(spec))
    throw DimensionMismatch("to_layers: parameter vector has wrong length");
  std::vector<LayerParams> layers(spec.num_layers());
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t fan_in = spec.layer_sizes[l];
    const std::size_t fan_out = spec.layer_sizes[l + 1];
    auto& lp = layers[l];
    lp.weights = Matrix(fan_out, fan_in);
    lp.bias.resize(fan_out);
    for (std::size_t o = 0; o < fan_out; ++o)
      for (std::size_t i = 0; i < fan_in; ++i)
        lp.weights(o, i) = p.values[off + o * fan_in + i];
    for (std::size_t o = 0; o < fan_out; ++o)
      lp.bias[o] = p.values[off + fan_in * fan_out + o];
    off += (fan_in + 1) * fan_out;
  }
  return layers;
}

ParamVector from_layers(const MlpSpec& spec,
                        const std::vector<LayerParams>& layers) {
  if (layers.size() != spec.num_layers())
    throw DimensionMismatch("from_layers: wrong layer count");
  ParamVector p;
  p.values.resize(param_count(spec));
  std::size_t off = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::size_t fan_in = spec.layer_sizes[l];
    const std::size_t fan_out = spec.layer_sizes[l + 1];
    if (layers[l].weights.rows() != fan_out ||
        layers[l].weights.cols() != fan_in ||
        layers[l].bias.size() != fan_out)
      throw DimensionMismatch("from_layers: layer shape mismatch");
    for (std::size_t o = 0; o < fan_out; ++o)
      for (std::size_t i = 0; i < fan_in; ++i)
        p.values[off + o * fan_in + i] = layers[l].weights(o, i);
    for (std::size_t o = 0; o < fan_out; ++o)
      p.values[off + fan_in * fan_out + o] = layers[l].bias[o];
    off += (fan_in + 1) * fan_out;
  }
  return p;
}

Partition final_layer_partition(const MlpSpec& spec) {
  const std::size_t beta = layer_param_count(spec, spec.num_layers() - 1);
  return Partition{param_count(spec) - beta, beta};
}

ParamVector init_params(const MlpSpec& spec, RngKey key, InitScheme scheme) {
  ParamVector p;
  p.values.assign(param_count(spec), 0.0);
  if (scheme == InitScheme::Zeros) return p;
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t fan_in = spec.layer_sizes[l];
    const std::size_t fan_out = spec.layer_sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Rng rng(derive(key, l));
    for (std::size_t k = 0; k < fan_in * fan_out; ++k)
      p.values[off + k] = rng.uniform(-bound, bound);
    off += (fan_in + 1) * fan_out;  // biases stay zero
  }
  return p;
}

namespace {
void check_input(const MlpSpec& spec, const ParamVector& params,
                 const Matrix& X) {
  if (X.cols() != spec.input_dim())
    throw DimensionMismatch("input columns != network input dimension");
  if (params.size() != param_count(spec))
    throw DimensionMismatch("parameter vector has wrong length");
}
}  // namespace

Matrix forward(const MlpSpec& spec, const ParamVector& params,
               const Matrix& X) {
  check_input(spec, params, X);
  return kernels::forward_batch(spec, params.values, X);
}

Matrix param_jacobian(const MlpSpec& spec, const ParamVector& params,
                      const Matrix& X) {
  check_input(spec, params, X);
  return kernels::param_jacobian_batch(spec, params.values, X);
}

Matrix last_hidden_activations(const MlpSpec& spec, const ParamVector& params,
                               const Matrix& X) {
  check_input(spec, params, X);
  return kernels::last_hidden_batch(spec, params.values, X);
}

Matrix final_layer_jacobian(const MlpSpec& spec, const ParamVector& params,
                            const Matrix& X) {
  check_input(spec, params, X);
  const std::size_t Q = spec.output_dim();
  const std::size_t H = spec.last_hidden_dim();
  const Matrix hid = kernels::last_hidden_batch(spec, params.values, X);
  // d f_q / d W_{q,j} = h_j, d f_q / d b_q = 1, zero across other outputs.
  Matrix J(X.rows() * Q, (H + 1) * Q);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    for (std::size_t q = 0; q < Q; ++q) {
      auto row = J.row(i * Q + q);
      for (std::size_t j = 0; j < H; ++j) row[q * H + j] = hid(i, j);
      row[H * Q + q] = 1.0;
    }
  }
  return J;
}

std::vector<double> jacobian_vector_product(const MlpSpec& spec,
                                            const ParamVector& params,
                                            const Matrix& X,
                                            std::span<const double> v) {
  check_input(spec, params, X);
  if (v.size() != params.size())
    throw DimensionMismatch("jvp: direction has wrong length");
  return kernels::jvp_batch(spec, params.values, X, v);
}

std::vector<double> vector_jacobian_product(const MlpSpec& spec,
                                            const ParamVector& params,
                                            const Matrix& X,
                                            std::span<const double> cotangent) {
  check_input(spec, params, X);
  if (cotangent.size() != X.rows() * spec.output_dim())
    throw DimensionMismatch("vjp: cotangent has wrong length");
  return kernels::vjp_batch(spec, params.values, X, cotangent);
}

}  // namespace fsvi
