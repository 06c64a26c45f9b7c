#pragma once

// Reference computations used by the verification suite. Each oracle works
// directly from the definitions (explicit sums over raw quantile values,
// forward windows, finite differences) and shares no code path with the
// library routines it is compared against.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "dgae/advantage.hpp"
#include "dgae/quantile.hpp"

namespace dgae::oracle {

/// (1/N) sum_i (f_i - g_i) from raw values.
inline double directional(std::span<const double> f, std::span<const double> g) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f[i] - g[i];
  return s / static_cast<double>(f.size());
}

/// ((1/N) sum_i |f_i - g_i|^p)^(1/p) from raw values.
inline double wasserstein(std::span<const double> f, std::span<const double> g, double p) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += std::pow(std::abs(f[i] - g[i]), p);
  return std::pow(s / static_cast<double>(f.size()), 1.0 / p);
}

/// Number of steps from t to the end of its episode segment inside the
/// buffer, boundary step included.
inline std::size_t segment_length(const RolloutBuffer& b, std::size_t t) {
  std::size_t m = 0;
  for (std::size_t j = t; j < b.size(); ++j) {
    ++m;
    if (b.transitions[j].done || b.transitions[j].truncated) break;
  }
  return m;
}

/// Raw quantile values of the bootstrap distribution after step j, already
/// scaled by `discount` (zero on termination).
inline std::vector<double> bootstrap_values(const RolloutBuffer& b, std::size_t j,
                                            double discount) {
  const auto& tr = b.transitions[j];
  const std::size_t n = b.value_dists[j].size();
  std::vector<double> out(n, 0.0);
  if (tr.done) return out;
  const auto& src = tr.truncated ? b.timeout_dists.at(j) : b.value_dists[j + 1];
  for (std::size_t i = 0; i < n; ++i) out[i] = discount * src[i];
  return out;
}

inline std::vector<double> td_errors(const RolloutBuffer& b, double gamma) {
  std::vector<double> d(b.size());
  for (std::size_t t = 0; t < b.size(); ++t) {
    d[t] = b.transitions[t].reward +
           directional(bootstrap_values(b, t, gamma), b.value_dists[t].values());
  }
  return d;
}

/// Forward truncated sum sum_k (gamma lambda)^k delta_{t+k} over the segment.
inline std::vector<double> truncated_sum(const RolloutBuffer& b, double gamma, double lambda) {
  const auto d = td_errors(b, gamma);
  std::vector<double> a(b.size());
  for (std::size_t t = 0; t < b.size(); ++t) {
    const std::size_t m = segment_length(b, t);
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k) s += std::pow(gamma * lambda, static_cast<double>(k)) * d[t + k];
    a[t] = s;
  }
  return a;
}

/// n-step estimator from its definition; n is capped at the segment length.
inline double n_step(const RolloutBuffer& b, std::size_t t, std::size_t n, double gamma) {
  const std::size_t m = std::min(n, segment_length(b, t));
  double s = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    s += std::pow(gamma, static_cast<double>(k)) * b.transitions[t + k].reward;
  }
  const double disc = std::pow(gamma, static_cast<double>(m));
  return s + directional(bootstrap_values(b, t + m - 1, disc), b.value_dists[t].values());
}

/// (1 - lambda) sum_{n<M} lambda^(n-1) A^(n) + lambda^(M-1) A^(M), M the
/// segment length: the exponentially weighted average of n-step estimators
/// with the tail weight collapsed onto the longest available window.
inline std::vector<double> lambda_average(const RolloutBuffer& b, double gamma, double lambda) {
  std::vector<double> a(b.size());
  for (std::size_t t = 0; t < b.size(); ++t) {
    const std::size_t m = segment_length(b, t);
    double s = 0.0;
    for (std::size_t n = 1; n < m; ++n) {
      s += (1.0 - lambda) * std::pow(lambda, static_cast<double>(n - 1)) * n_step(b, t, n, gamma);
    }
    s += std::pow(lambda, static_cast<double>(m - 1)) * n_step(b, t, m, gamma);
    a[t] = s;
  }
  return a;
}

/// Central finite-difference gradient of f at x.
inline std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                             std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Relative error with a floor on the denominator so that gradients that are
/// both ~0 compare as equal.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace dgae::oracle
