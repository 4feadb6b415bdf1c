#include "fsvi/context.hpp"

#include <algorithm>
#include <cmath>

#include "fsvi/errors.hpp"

namespace fsvi {

BoxBounds empirical_bounds(const Matrix& X_train) {
  if (X_train.rows() == 0) throw EmptyData("empirical_bounds: no rows");
  BoxBounds b;
  b.lo.assign(X_train.cols(), 0.0);
  b.hi.assign(X_train.cols(), 0.0);
  for (std::size_t d = 0; d < X_train.cols(); ++d) {
    double lo = X_train(0, d), hi = X_train(0, d);
    for (std::size_t r = 1; r < X_train.rows(); ++r) {
      lo = std::min(lo, X_train(r, d));
      hi = std::max(hi, X_train(r, d));
    }
    b.lo[d] = lo;
    b.hi[d] = hi;
  }
  return b;
}

void ContextConfig::validate() const {
  if (s_sets == 0 || k == 0)
    throw ConfigError("ContextConfig: s_sets and k must be positive");
  if (minibatch_mix_fraction < 0.0 || minibatch_mix_fraction > 1.0)
    throw ConfigError("ContextConfig: mix fraction outside [0, 1]");
  if (const auto* box = std::get_if<UniformBoxSource>(&source)) {
    for (std::size_t d = 0; d < box->bounds.dim(); ++d) {
      if (!(box->bounds.lo[d] <= box->bounds.hi[d]) ||
          !std::isfinite(box->bounds.lo[d]) ||
          !std::isfinite(box->bounds.hi[d]))
        throw ConfigError("ContextConfig: invalid box bounds");
    }
  } else if (const auto* mono = std::get_if<MonochromeSource>(&source)) {
    if (mono->pools.size() != mono->channels)
      throw ConfigError("ContextConfig: one pool per channel required");
    for (const auto& pool : mono->pools)
      if (pool.empty()) throw EmptyPool("ContextConfig: empty channel pool");
  } else if (const auto* aux = std::get_if<AuxiliarySource>(&source)) {
    if (aux->rows.rows() == 0)
      throw EmptyData("ContextConfig: auxiliary source has no rows");
  }
}

std::size_t ContextConfig::dim() const {
  if (const auto* box = std::get_if<UniformBoxSource>(&source))
    return box->bounds.dim();
  if (const auto* mono = std::get_if<MonochromeSource>(&source))
    return mono->channels * mono->pixels_per_channel;
  return std::get<AuxiliarySource>(source).rows.cols();
}

Matrix sample_uniform_box(const BoxBounds& bounds, std::size_t k, RngKey key) {
  Matrix out(k, bounds.dim());
  Rng rng(key);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t d = 0; d < bounds.dim(); ++d)
      out(r, d) = rng.uniform(bounds.lo[d], bounds.hi[d]);
  return out;
}

Matrix sample_monochrome(const MonochromeSource& source, std::size_t k,
                         RngKey key) {
  for (const auto& pool : source.pools)
    if (pool.empty()) throw EmptyPool("sample_monochrome: empty channel pool");
  const std::size_t px = source.pixels_per_channel;
  Matrix out(k, source.channels * px);
  Rng rng(key);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < source.channels; ++c) {
      const auto& pool = source.pools[c];
      const double v = pool[rng.uniform_index(pool.size())];
      for (std::size_t p = 0; p < px; ++p) out(r, c * px + p) = v;
    }
  }
  return out;
}

MonochromeSource build_monochrome_source(const Matrix& train_images,
                                         std::size_t channels) {
  if (train_images.rows() == 0)
    throw EmptyData("build_monochrome_source: no images");
  if (channels == 0 || train_images.cols() % channels != 0)
    throw ConfigError("build_monochrome_source: image size not divisible by "
                      "channel count");
  MonochromeSource src;
  src.channels = channels;
  src.pixels_per_channel = train_images.cols() / channels;
  src.pools.resize(channels);
  // Channel-major layout: channel c owns columns [c*px, (c+1)*px).
  for (std::size_t c = 0; c < channels; ++c) {
    auto& pool = src.pools[c];
    pool.reserve(train_images.rows() * src.pixels_per_channel);
    for (std::size_t r = 0; r < train_images.rows(); ++r)
      for (std::size_t p = 0; p < src.pixels_per_channel; ++p)
        pool.push_back(train_images(r, c * src.pixels_per_channel + p));
  }
  return src;
}

namespace {

Matrix draw_from_source(const ContextSource& source, std::size_t k,
                        RngKey key) {
  if (const auto* box = std::get_if<UniformBoxSource>(&source))
    return sample_uniform_box(box->bounds, k, key);
  if (const auto* mono = std::get_if<MonochromeSource>(&source))
    return sample_monochrome(*mono, k, key);
  const auto& aux = std::get<AuxiliarySource>(source);
  Matrix out(k, aux.rows.cols());
  Rng rng(key);
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t pick = rng.uniform_index(aux.rows.rows());
    for (std::size_t d = 0; d < aux.rows.cols(); ++d)
      out(r, d) = aux.rows(pick, d);
  }
  return out;
}

// Round-half-up split of the mix fraction.
std::size_t mix_count(double fraction, std::size_t k) {
  return static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(k) + 0.5));
}

}  // namespace

ContextBatch assemble_contexts(const ContextConfig& config,
                               const Matrix& minibatch_X, RngKey key) {
  config.validate();
  const std::size_t n_mix = mix_count(config.minibatch_mix_fraction, config.k);
  if (n_mix > 0 && minibatch_X.rows() == 0)
    throw EmptyData("assemble_contexts: mix fraction > 0 with empty batch");
  const std::size_t D = config.dim();
  if (n_mix > 0 && minibatch_X.cols() != D)
    throw DimensionMismatch("assemble_contexts: minibatch dimension differs "
                            "from context source");

  ContextBatch batch;
  batch.sets.reserve(config.s_sets);
  for (std::size_t s = 0; s < config.s_sets; ++s) {
    const RngKey set_key = derive(key, s);
    Matrix set(config.k, D);
    std::size_t row = 0;
    if (n_mix > 0) {
      Rng rng(derive(set_key, 0));
      const std::size_t B = minibatch_X.rows();
      std::vector<std::size_t> picks;
      if (n_mix <= B) {
        // Without replacement: partial Fisher-Yates over the batch indices.
        std::vector<std::size_t> idx(B);
        for (std::size_t i = 0; i < B; ++i) idx[i] = i;
        for (std::size_t i = 0; i < n_mix; ++i) {
          const std::size_t j = i + rng.uniform_index(B - i);
          std::swap(idx[i], idx[j]);
          picks.push_back(idx[i]);
        }
      } else {
        for (std::size_t i = 0; i < n_mix; ++i)
          picks.push_back(rng.uniform_index(B));
      }
      for (std::size_t pick : picks) {
        for (std::size_t d = 0; d < D; ++d) set(row, d) = minibatch_X(pick, d);
        ++row;
      }
    }
    if (row < config.k) {
      const Matrix src =
          draw_from_source(config.source, config.k - row, derive(set_key, 1));
      for (std::size_t r = 0; r < src.rows(); ++r, ++row)
        for (std::size_t d = 0; d < D; ++d) set(row, d) = src(r, d);
    }
    batch.sets.push_back(std::move(set));
  }
  return batch;
}

}  // namespace fsvi
