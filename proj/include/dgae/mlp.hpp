#pragma once

// Fully connected tanh network with exact reverse-mode gradients, and the
// Adam optimizer used to train it.
//
// Parameters live in one flat vector. Layer l (mapping widths[l] ->
// widths[l+1]) stores its weight matrix row-major (out x in) followed by its
// bias vector. Gradients use the same layout.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dgae/errors.hpp"

namespace dgae {

struct MlpParams {
  std::vector<std::size_t> widths;
  std::vector<double> data;

  static std::size_t count(const std::vector<std::size_t>& widths) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      n += widths[l + 1] * widths[l] + widths[l + 1];
    }
    return n;
  }

  static MlpParams zeros(std::vector<std::size_t> widths) {
    if (widths.size() < 2) throw DimensionError("MlpParams: need >= 2 widths");
    for (auto w : widths) {
      if (w == 0) throw DimensionError("MlpParams: zero-width layer");
    }
    MlpParams p;
    p.data.assign(count(widths), 0.0);
    p.widths = std::move(widths);
    return p;
  }

  std::size_t num_layers() const { return widths.size() - 1; }
  std::size_t input_dim() const { return widths.front(); }
  std::size_t output_dim() const { return widths.back(); }

  std::size_t weight_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) {
      off += widths[l + 1] * widths[l] + widths[l + 1];
    }
    return off;
  }
  std::size_t bias_offset(std::size_t layer) const {
    return weight_offset(layer) + widths[layer + 1] * widths[layer];
  }

  void validate() const {
    if (widths.size() < 2) throw DimensionError("MlpParams: need >= 2 widths");
    if (data.size() != count(widths)) {
      throw DimensionError("MlpParams: parameter count does not match widths");
    }
  }

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Hidden widths [in, h, h, out] for the two-hidden-layer networks used here.
inline std::vector<std::size_t> two_layer_widths(std::size_t in, std::size_t hidden,
                                                 std::size_t out) {
  return {in, hidden, hidden, out};
}

/// Orthogonal-style init: each layer's weight matrix is a scaled random
/// matrix with orthonormal rows (or columns, whichever is fewer), biases zero.
/// Hidden layers use gain sqrt(2); the output layer uses `output_gain`.
template <typename Rng>
MlpParams init_mlp(std::vector<std::size_t> widths, Rng& rng, double output_gain) {
  MlpParams p = MlpParams::zeros(std::move(widths));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    const std::size_t rows = p.widths[l + 1];
    const std::size_t cols = p.widths[l];
    const double gain = (l + 1 == p.num_layers()) ? output_gain : std::sqrt(2.0);
    // Orthonormalize along the shorter dimension with modified Gram-Schmidt.
    const bool by_rows = rows <= cols;
    const std::size_t k = by_rows ? rows : cols;
    const std::size_t len = by_rows ? cols : rows;
    std::vector<std::vector<double>> vecs(k, std::vector<double>(len));
    for (auto& v : vecs) {
      for (;;) {
        for (double& x : v) x = normal(rng);
        for (std::size_t prev = 0; &vecs[prev] != &v; ++prev) {
          const double dot = std::inner_product(v.begin(), v.end(),
                                                vecs[prev].begin(), 0.0);
          for (std::size_t i = 0; i < len; ++i) v[i] -= dot * vecs[prev][i];
        }
        const double nrm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
        if (nrm > 1e-8) {
          for (double& x : v) x /= nrm;
          break;
        }
      }
    }
    double* w = p.data.data() + p.weight_offset(l);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        w[r * cols + c] = gain * (by_rows ? vecs[r][c] : vecs[c][r]);
      }
    }
  }
  return p;
}

/// Post-activation values of every layer, input first.
struct MlpCache {
  std::vector<std::vector<double>> activations;
};

inline std::vector<double> forward(const MlpParams& params,
                                   std::span<const double> input, MlpCache& cache) {
  if (input.size() != params.input_dim()) {
    throw DimensionError("forward: input has " + std::to_string(input.size()) +
                         " entries, network expects " +
                         std::to_string(params.input_dim()));
  }
  const std::size_t L = params.num_layers();
  cache.activations.resize(L + 1);
  cache.activations[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t rows = params.widths[l + 1];
    const std::size_t cols = params.widths[l];
    const double* w = params.data.data() + params.weight_offset(l);
    const double* b = params.data.data() + params.bias_offset(l);
    const auto& x = cache.activations[l];
    auto& y = cache.activations[l + 1];
    y.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      double s = b[r];
      const double* wr = w + r * cols;
      for (std::size_t c = 0; c < cols; ++c) s += wr[c] * x[c];
      y[r] = (l + 1 < L) ? std::tanh(s) : s;
    }
  }
  return cache.activations[L];
}

inline std::vector<double> forward(const MlpParams& params,
                                   std::span<const double> input) {
  MlpCache cache;
  return forward(params, input, cache);
}

/// Accumulates d(sum_k output_grad[k] * output[k]) / d(params) into `grad`
/// using activations from a previous forward pass. Returns the gradient with
/// respect to the input.
inline std::vector<double> backward_accumulate(const MlpParams& params,
                                               const MlpCache& cache,
                                               std::span<const double> output_grad,
                                               std::span<double> grad) {
  const std::size_t L = params.num_layers();
  if (output_grad.size() != params.output_dim()) {
    throw DimensionError("backward: output_grad has " +
                         std::to_string(output_grad.size()) +
                         " entries, network outputs " +
                         std::to_string(params.output_dim()));
  }
  if (grad.size() != params.data.size()) {
    throw DimensionError("backward: gradient buffer has wrong size");
  }
  if (cache.activations.size() != L + 1) {
    throw StateError("backward: cache does not hold a forward pass");
  }
  std::vector<double> delta(output_grad.begin(), output_grad.end());
  std::vector<double> prev;
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t rows = params.widths[l + 1];
    const std::size_t cols = params.widths[l];
    const double* w = params.data.data() + params.weight_offset(l);
    double* gw = grad.data() + params.weight_offset(l);
    double* gb = grad.data() + params.bias_offset(l);
    const auto& x = cache.activations[l];
    prev.assign(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = delta[r];
      gb[r] += d;
      if (d == 0.0) continue;
      double* gwr = gw + r * cols;
      const double* wr = w + r * cols;
      for (std::size_t c = 0; c < cols; ++c) {
        gwr[c] += d * x[c];
        prev[c] += d * wr[c];
      }
    }
    if (l > 0) {
      // x = tanh(pre) for every hidden layer: dtanh = 1 - x^2.
      for (std::size_t c = 0; c < cols; ++c) prev[c] *= 1.0 - x[c] * x[c];
    }
    delta.swap(prev);
  }
  return delta;
}

/// Exact gradients of sum_k output_grad[k] * output[k] w.r.t. every parameter.
inline std::vector<double> backward(const MlpParams& params,
                                    std::span<const double> input,
                                    std::span<const double> output_grad) {
  MlpCache cache;
  forward(params, input, cache);
  std::vector<double> grad(params.data.size(), 0.0);
  backward_accumulate(params, cache, output_grad, grad);
  return grad;
}

/// Ascending order of `raw` as a permutation: sorted[i] = raw[perm[i]].
/// Ties keep their original order so the permutation is deterministic.
inline std::vector<std::size_t> sort_permutation(std::span<const double> raw) {
  std::vector<std::size_t> perm(raw.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::size_t a, std::size_t b) { return raw[a] < raw[b]; });
  return perm;
}

/// Routes a gradient w.r.t. sorted outputs back to raw output positions.
inline std::vector<double> unsort_gradient(std::span<const double> sorted_grad,
                                           std::span<const std::size_t> perm) {
  std::vector<double> raw(sorted_grad.size(), 0.0);
  for (std::size_t i = 0; i < perm.size(); ++i) raw[perm[i]] = sorted_grad[i];
  return raw;
}

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// Rescales `grad` so its L2 norm is at most max_norm (no-op if max_norm <= 0).
inline double clip_grad_norm(std::span<double> grad, double max_norm) {
  const double norm = l2_norm(grad);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / (norm + 1e-12);
    for (double& g : grad) g *= s;
  }
  return norm;
}

/// Adam with bias correction.
class Adam {
 public:
  explicit Adam(std::size_t size, double lr = 3e-4, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
      throw DimensionError("Adam: size mismatch");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

}  // namespace dgae
