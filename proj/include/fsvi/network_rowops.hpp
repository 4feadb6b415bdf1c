#pragma once

// Scalar-generic single-input network passes. These are the only place the
// layer arithmetic is written down; the double-precision batch kernels and
// the dual-number reference objective both instantiate them.

#include <cmath>
#include <span>
#include <vector>

#include "fsvi/network.hpp"

namespace fsvi::rowops {

using std::tanh;

template <class S>
S activate(Activation a, const S& z) {
  switch (a) {
    case Activation::Tanh:
      return tanh(z);
    case Activation::Relu:
      return z > S(0) ? z : S(0);
    case Activation::Identity:
      return z;
  }
  return z;
}

// Derivative in terms of the pre-activation. ReLU at exactly 0 returns 0.
template <class S>
S activate_grad(Activation a, const S& z) {
  switch (a) {
    case Activation::Tanh: {
      const S t = tanh(z);
      return S(1) - t * t;
    }
    case Activation::Relu:
      return z > S(0) ? S(1) : S(0);
    case Activation::Identity:
      return S(1);
  }
  return S(1);
}

// Post-activation values per layer; cache[0] is the input, cache[L] the
// network output. Pre-activations are kept for the hidden layers only.
template <class S>
struct RowCache {
  std::vector<std::vector<S>> post;  // num_layers + 1 entries
  std::vector<std::vector<S>> pre;   // num_layers entries
};

template <class S, class In>
RowCache<S> forward_row(const MlpSpec& spec, std::span<const S> params,
                        const In& x) {
  const std::size_t L = spec.num_layers();
  RowCache<S> cache;
  cache.post.resize(L + 1);
  cache.pre.resize(L);
  cache.post[0].assign(x.begin(), x.end());
  std::size_t off = 0;
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t fan_in = spec.layer_sizes[l];
    const std::size_t fan_out = spec.layer_sizes[l + 1];
    const S* W = params.data() + off;
    const S* b = params.data() + off + fan_in * fan_out;
    auto& h = cache.post[l];
    auto& z = cache.pre[l];
    z.resize(fan_out);
    for (std::size_t o = 0; o < fan_out; ++o) {
      S acc = b[o];
      const S* w_row = W + o * fan_in;
      for (std::size_t i = 0; i < fan_in; ++i) acc = acc + w_row[i] * h[i];
      z[o] = acc;
    }
    auto& out = cache.post[l + 1];
    out.resize(fan_out);
    if (l + 1 < L) {
      const Activation a = spec.hidden_activations[l];
      for (std::size_t o = 0; o < fan_out; ++o) out[o] = activate(a, z[o]);
    } else {
      out = z;  // identity output
    }
    off += (fan_in + 1) * fan_out;
  }
  return cache;
}

// Accumulates sum_q cot[q] * d f_q / d theta into `grad` with one backward
// sweep (cot is the output cotangent for this input row). A one-hot
// cotangent yields a single Jacobian row.
template <class S>
void backward_row_cotangent(const MlpSpec& spec, std::span<const S> params,
                            const RowCache<S>& cache, std::span<const S> cot,
                            std::span<S> grad) {
  const std::size_t L = spec.num_layers();
  std::vector<S> delta(cot.begin(), cot.end());
  std::size_t off = param_count(spec);
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t fan_in = spec.layer_sizes[l];
    const std::size_t fan_out = spec.layer_sizes[l + 1];
    off -= (fan_in + 1) * fan_out;
    const S* W = params.data() + off;
    const auto& h = cache.post[l];
    S* gW = grad.data() + off;
    S* gb = grad.data() + off + fan_in * fan_out;
    for (std::size_t o = 0; o < fan_out; ++o) {
      gb[o] = gb[o] + delta[o];
      S* gw_row = gW + o * fan_in;
      for (std::size_t i = 0; i < fan_in; ++i)
        gw_row[i] = gw_row[i] + delta[o] * h[i];
    }
    if (l == 0) break;
    std::vector<S> prev(fan_in, S(0));
    for (std::size_t i = 0; i < fan_in; ++i) {
      S acc(0);
      for (std::size_t o = 0; o < fan_out; ++o)
        acc = acc + W[o * fan_in + i] * delta[o];
      prev[i] = acc * activate_grad(spec.hidden_activations[l - 1],
                                    cache.pre[l - 1][i]);
    }
    delta = std::move(prev);
  }
}

// Tangent propagation: returns J(x; params) * v for one input row, reusing
// the primal cache.
template <class S>
std::vector<S> jvp_row(const MlpSpec& spec, std::span<const S> params,
                       const RowCache<S>& cache, std::span<const S> v) {
  const std::size_t L = spec.num_layers();
  std::vector<S> dh(spec.input_dim(), S(0));  // input does not vary
  std::size_t off = 0;
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t fan_in = spec.layer_sizes[l];
    const std::size_t fan_out = spec.layer_sizes[l + 1];
    const S* W = params.data() + off;
    const S* dW = v.data() + off;
    const S* db = v.data() + off + fan_in * fan_out;
    const auto& h = cache.post[l];
    std::vector<S> dz(fan_out);
    for (std::size_t o = 0; o < fan_out; ++o) {
      S acc = db[o];
      const S* w_row = W + o * fan_in;
      const S* dw_row = dW + o * fan_in;
      for (std::size_t i = 0; i < fan_in; ++i)
        acc = acc + dw_row[i] * h[i] + w_row[i] * dh[i];
      dz[o] = acc;
    }
    if (l + 1 < L) {
      const Activation a = spec.hidden_activations[l];
      dh.resize(fan_out);
      for (std::size_t o = 0; o < fan_out; ++o)
        dh[o] = activate_grad(a, cache.pre[l][o]) * dz[o];
    } else {
      dh = std::move(dz);
    }
    off += (fan_in + 1) * fan_out;
  }
  return dh;
}

}  // namespace fsvi::rowops
