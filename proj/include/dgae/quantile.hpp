#pragma once

// Quantile-function representation of return distributions and the 1-D
// transport quantities defined on it.
//
// A QuantileDistribution with N entries stores the inverse CDF evaluated at
// the midpoint fractions q_i = (2i+1)/(2N). Every integral over q in [0,1]
// is taken as the uniform average over those N fractions, which is exact
// for the N-atom distributions the value network represents.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dgae/errors.hpp"
#include "dgae/format.hpp"

namespace dgae {

/// Midpoint quantile fractions q_i = (2i+1)/(2N).
class QuantileFractions {
 public:
  explicit QuantileFractions(std::size_t n) : fractions_(n) {
    if (n == 0) throw DimensionError("QuantileFractions: N must be >= 1");
    const double denom = 2.0 * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      fractions_[i] = static_cast<double>(2 * i + 1) / denom;
    }
  }

  std::size_t size() const { return fractions_.size(); }
  double operator[](std::size_t i) const { return fractions_[i]; }
  std::span<const double> values() const { return fractions_; }

 private:
  std::vector<double> fractions_;
};

/// N-quantile inverse-CDF representation of a return distribution.
///
/// Invariants: N >= 1, every entry finite, entries nondecreasing. The
/// checked constructor enforces all three.
class QuantileDistribution {
 public:
  explicit QuantileDistribution(std::vector<double> values)
      : values_(std::move(values)) {
    validate();
  }

  QuantileDistribution(std::initializer_list<double> values)
      : QuantileDistribution(std::vector<double>(values)) {}

  static QuantileDistribution constant(std::size_t n, double value) {
    return QuantileDistribution(std::vector<double>(n, value));
  }

  /// Sorts raw (possibly crossing) quantile estimates into a valid inverse CDF.
  static QuantileDistribution from_unsorted(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return QuantileDistribution(std::move(values));
  }

  /// Order statistics of `samples` at the midpoint ranks floor(q_i * M).
  static QuantileDistribution from_samples(std::vector<double> samples,
                                           std::size_t n) {
    if (samples.empty()) {
      throw DimensionError("QuantileDistribution::from_samples: no samples");
    }
    if (n == 0) throw DimensionError("QuantileDistribution: N must be >= 1");
    std::sort(samples.begin(), samples.end());
    const std::size_t m = samples.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t rank = std::min(m - 1, (2 * i + 1) * m / (2 * n));
      out[i] = samples[rank];
    }
    return QuantileDistribution(std::move(out));
  }

  /// Inverse CDF of a finite discrete law {(value, probability)} at the
  /// midpoint fractions: the smallest atom u with F(u) >= q_i.
  static QuantileDistribution from_atoms(
      std::vector<std::pair<double, double>> atoms, std::size_t n) {
    if (atoms.empty()) {
      throw DimensionError("QuantileDistribution::from_atoms: no atoms");
    }
    if (n == 0) throw DimensionError("QuantileDistribution: N must be >= 1");
    std::sort(atoms.begin(), atoms.end());
    double total = 0.0;
    for (const auto& [value, prob] : atoms) total += prob;
    const QuantileFractions q(n);
    std::vector<double> out(n);
    std::size_t k = 0;
    double cdf = atoms[0].second / total;
    for (std::size_t i = 0; i < n; ++i) {
      while (cdf < q[i] - 1e-12 && k + 1 < atoms.size()) {
        ++k;
        cdf += atoms[k].second / total;
      }
      out[i] = atoms[k].first;
    }
    return QuantileDistribution(std::move(out));
  }

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const QuantileDistribution&,
                         const QuantileDistribution&) = default;

 private:
  void validate() const {
    if (values_.empty()) {
      throw DimensionError("QuantileDistribution: N must be >= 1");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        throw DomainError("QuantileDistribution: non-finite quantile at index " +
                          std::to_string(i));
      }
      if (i > 0 && values_[i] < values_[i - 1]) {
        throw DomainError("QuantileDistribution: quantiles decrease at index " +
                          std::to_string(i));
      }
    }
  }

  std::vector<double> values_;
};

namespace detail {

inline void require_same_size(const QuantileDistribution& f,
                              const QuantileDistribution& g,
                              const char* where) {
  if (f.size() != g.size()) {
    throw DimensionError(std::string(where) + ": quantile counts differ (" +
                         std::to_string(f.size()) + " vs " +
                         std::to_string(g.size()) + ")");
  }
}

}  // namespace detail

inline double mean(const QuantileDistribution& f) {
  const auto v = f.values();
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

/// Signed transport cost with linear cost L(x) = x:
/// (1/N) * sum_i (F[i] - G[i]). Negative means G carries more return mass.
inline double directional_metric(const QuantileDistribution& f,
                                 const QuantileDistribution& g) {
  detail::require_same_size(f, g, "directional_metric");
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) sum += f[i] - g[i];
  return sum / static_cast<double>(f.size());
}

/// Function object wrapper so estimators can be instantiated with an
/// alternative comparison (used by the mutation checks in verify).
struct DirectionalMetric {
  double operator()(const QuantileDistribution& f,
                    const QuantileDistribution& g) const {
    return directional_metric(f, g);
  }
};

/// Quantiles of eta * U for eta > 0.
inline QuantileDistribution scale(const QuantileDistribution& f, double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw DomainError("scale: eta must be finite and > 0");
  }
  std::vector<double> out(f.values().begin(), f.values().end());
  for (double& x : out) x *= eta;
  return QuantileDistribution(std::move(out));
}

inline QuantileDistribution shift(const QuantileDistribution& f, double c) {
  if (!std::isfinite(c)) throw DomainError("shift: offset must be finite");
  std::vector<double> out(f.values().begin(), f.values().end());
  for (double& x : out) x += c;
  return QuantileDistribution(std::move(out));
}

/// p-Wasserstein distance between two quantile functions, p >= 1 (p = inf
/// gives the largest quantile gap).
inline double wasserstein_p(const QuantileDistribution& f,
                            const QuantileDistribution& g, double p) {
  if (!(p >= 1.0)) throw DomainError("wasserstein_p: p must be >= 1");
  detail::require_same_size(f, g, "wasserstein_p");
  const double n = static_cast<double>(f.size());
  if (std::isinf(p)) {
    double worst = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) worst = std::max(worst, std::abs(f[i] - g[i]));
    return worst;
  }
  if (p == 1.0) {
    double sum = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) sum += std::abs(f[i] - g[i]);
    return sum / n;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    sum += std::pow(std::abs(f[i] - g[i]), p);
  }
  return std::pow(sum / n, 1.0 / p);
}

/// One comma-separated line of N decimal values (no trailing newline).
inline std::string to_csv_line(const QuantileDistribution& f) {
  std::string line;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (i > 0) line += ',';
    line += format_double(f[i]);
  }
  return line;
}

inline QuantileDistribution parse_csv_line(std::string_view line) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= line.size()) {
    auto end = line.find(',', start);
    if (end == std::string_view::npos) end = line.size();
    const auto field = line.substr(start, end - start);
    const auto value = parse_double(field);
    if (!value) {
      throw DomainError("parse_csv_line: bad quantile '" + std::string(field) +
                        "'");
    }
    values.push_back(*value);
    start = end + 1;
  }
  return QuantileDistribution(std::move(values));
}

}  // namespace dgae
