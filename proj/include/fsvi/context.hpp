#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "fsvi/matrix.hpp"
#include "fsvi/rng.hpp"

namespace fsvi {

// Per-dimension [lo, hi] intervals.
struct BoxBounds {
  std::vector<double> lo;
  std::vector<double> hi;
  std::size_t dim() const { return lo.size(); }
};

BoxBounds empirical_bounds(const Matrix& X_train);

// Context point sources.
struct UniformBoxSource {
  BoxBounds bounds;
};

// One pixel-value pool per channel, built from training images. A sample
// fills each channel with one value drawn from that channel's pool.
struct MonochromeSource {
  std::size_t channels = 1;
  std::size_t pixels_per_channel = 0;  // flattened D = channels * pixels
  std::vector<std::vector<double>> pools;
};

// Plain row matrix of candidate context points (e.g. a related dataset
// loaded from CSV).
struct AuxiliarySource {
  Matrix rows;
};

using ContextSource =
    std::variant<UniformBoxSource, MonochromeSource, AuxiliarySource>;

struct ContextConfig {
  ContextSource source;
  std::size_t s_sets = 1;  // S
  std::size_t k = 1;       // points per set
  double minibatch_mix_fraction = 0.0;

  void validate() const;
  std::size_t dim() const;
};

// S sets of K x D context points.
struct ContextBatch {
  std::vector<Matrix> sets;
};

Matrix sample_uniform_box(const BoxBounds& bounds, std::size_t k, RngKey key);

Matrix sample_monochrome(const MonochromeSource& source, std::size_t k,
                         RngKey key);

MonochromeSource build_monochrome_source(const Matrix& train_images,
                                         std::size_t channels);

// Each set takes round(mix * K) rows from the minibatch (without replacement
// when it fits, with replacement otherwise) and fills the rest from the
// configured source. Set i draws from derive(key, i).
ContextBatch assemble_contexts(const ContextConfig& config,
                               const Matrix& minibatch_X, RngKey key);

}  // namespace fsvi
