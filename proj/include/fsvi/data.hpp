#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fsvi/matrix.hpp"
#include "fsvi/rng.hpp"

namespace fsvi {

// Per-column standardization statistics. Columns with zero spread are left
// unscaled and flagged.
struct ColumnStats {
  std::vector<double> mean;
  std::vector<double> sd;
  std::vector<bool> scaled;
};

struct Dataset {
  Matrix X;
  Matrix y;  // regression: N x Q targets; classification: N x 1 class index
  bool classification = false;
  std::optional<ColumnStats> x_stats;  // set once standardized
  std::optional<ColumnStats> y_stats;

  std::size_t size() const { return X.rows(); }
  std::vector<int> labels() const;  // classification targets as ints
};

// Interleaved half circles: class 0 on the unit upper half circle centered
// at the origin, class 1 on the mirrored half circle through
// (1 - cos t, 0.5 - sin t). Points are placed on an even parameter grid and
// perturbed with isotropic Gaussian noise.
Dataset two_moons(std::size_t n, double noise_sd, RngKey key);

enum class Synthetic1dKind { GapSine };

// Inputs drawn uniformly from [-2, -0.5] and [0.5, 2] (half each; the open
// gap (-0.5, 0.5) stays empty), targets sin(3x) plus Gaussian noise.
Dataset synthetic_1d(Synthetic1dKind kind, std::size_t n, double noise_sd,
                     RngKey key);

// Numeric CSV with optional single header row. Columns named in
// target_columns become y (in the given order); the rest become X with the
// original column order preserved.
Dataset load_csv(const std::string& path,
                 const std::vector<std::size_t>& target_columns,
                 bool has_header);

// Applies train-split statistics to the train set and every other split.
// Regression targets are standardized as well; classification targets are
// untouched. Statistics are stored on each dataset for inverse transforms.
struct StandardizeResult {
  Dataset train;
  std::vector<Dataset> others;
  ColumnStats x_stats;
  std::optional<ColumnStats> y_stats;
};

StandardizeResult standardize(const Dataset& train,
                              const std::vector<Dataset>& others);

Matrix unstandardize_targets(const Matrix& y, const ColumnStats& stats);
Matrix unstandardize_variance(const Matrix& var, const ColumnStats& stats);

// Seeded shuffle followed by a contiguous split; fractions must sum to 1.
std::vector<Dataset> split(const Dataset& dataset,
                           const std::vector<double>& fractions, RngKey key);

// CSV serialization used by datagen / predict outputs.
std::string dataset_csv(const Dataset& data);

}  // namespace fsvi
