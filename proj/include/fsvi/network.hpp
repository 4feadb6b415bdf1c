#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fsvi/errors.hpp"
#include "fsvi/matrix.hpp"
#include "fsvi/rng.hpp"

namespace fsvi {

enum class Activation { Tanh, Relu, Identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Fully connected feed-forward architecture. layer_sizes = [D, H1, ..., Q];
// one activation per hidden layer, identity on the output. A two-entry
// layer_sizes [D, Q] is permitted and gives a plain affine map, which the
// linear-model oracles rely on.
struct MlpSpec {
  std::vector<std::size_t> layer_sizes;
  std::vector<Activation> hidden_activations;

  MlpSpec() = default;
  MlpSpec(std::vector<std::size_t> sizes, Activation uniform_hidden);
  MlpSpec(std::vector<std::size_t> sizes, std::vector<Activation> hidden);

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  // Number of weight layers (affine maps).
  std::size_t num_layers() const { return layer_sizes.size() - 1; }
  std::size_t last_hidden_dim() const {
    return layer_sizes[layer_sizes.size() - 2];
  }

  void validate() const;
};

// Total parameter count: sum over layers of (fan_in + 1) * fan_out.
std::size_t param_count(const MlpSpec& spec);

// Flat offset of layer l's (W, b) block. Within a block the weight matrix is
// stored row-major (fan_out x fan_in) followed by the bias. The final layer's
// block is therefore contiguous and trailing.
std::size_t layer_offset(const MlpSpec& spec, std::size_t layer);
std::size_t layer_param_count(const MlpSpec& spec, std::size_t layer);

// Flat parameter vector in the layout above.
struct ParamVector {
  std::vector<double> values;

  ParamVector() = default;
  explicit ParamVector(std::vector<double> v) : values(std::move(v)) {}
  std::size_t size() const { return values.size(); }
};

struct LayerParams {
  Matrix weights;             // fan_out x fan_in
  std::vector<double> bias;   // fan_out
};

// Lossless layout round-trip.
std::vector<LayerParams> to_layers(const MlpSpec& spec, const ParamVector& p);
ParamVector from_layers(const MlpSpec& spec,
                        const std::vector<LayerParams>& layers);

// Split of the flat layout into the leading block (all layers but the last)
// and the trailing final-layer block.
struct Partition {
  std::size_t alpha_count = 0;
  std::size_t beta_count = 0;
  std::size_t total() const { return alpha_count + beta_count; }
};

Partition final_layer_partition(const MlpSpec& spec);

enum class InitScheme { UniformFanIn, Zeros };

// UniformFanIn draws each weight from U(-1/sqrt(fan_in), 1/sqrt(fan_in)) and
// zeroes the biases.
ParamVector init_params(const MlpSpec& spec, RngKey key, InitScheme scheme);

// Batch evaluation: row i of the result is f(x_i; params).
Matrix forward(const MlpSpec& spec, const ParamVector& params, const Matrix& X);

// Full parameter Jacobian at `params`. Row (i*Q + q) holds
// d f_q(x_i) / d theta. ReLU uses subgradient 0 at exactly-zero
// pre-activations.
Matrix param_jacobian(const MlpSpec& spec, const ParamVector& params,
                      const Matrix& X);

// Closed-form Jacobian with respect to the final layer's parameters only;
// equals the trailing beta_count columns of param_jacobian.
Matrix final_layer_jacobian(const MlpSpec& spec, const ParamVector& params,
                            const Matrix& X);

// Activations feeding the final layer, one row per input (equals X for a
// single-layer net).
Matrix last_hidden_activations(const MlpSpec& spec, const ParamVector& params,
                               const Matrix& X);

// Directional derivative J(X; params) * v without materializing J.
std::vector<double> jacobian_vector_product(const MlpSpec& spec,
                                            const ParamVector& params,
                                            const Matrix& X,
                                            std::span<const double> v);

// J(X; params)^T * cotangent for a length N*Q cotangent; the batch gradient
// of <cotangent, f(X)>.
std::vector<double> vector_jacobian_product(const MlpSpec& spec,
                                            const ParamVector& params,
                                            const Matrix& X,
                                            std::span<const double> cotangent);

}  // namespace fsvi
