#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmcmc/samplers.hpp"

namespace pmcmc {

namespace detail {

struct CenteredSeries {
  std::vector<double> values;
  double variance = 0.0;  // biased, divide by M
};

inline CenteredSeries center(std::span<const double> series) {
  if (series.size() < 2) throw std::invalid_argument("series needs at least two values");
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= static_cast<double>(series.size());
  CenteredSeries out;
  out.values.reserve(series.size());
  double ss = 0.0;
  for (double x : series) {
    out.values.push_back(x - mean);
    ss += (x - mean) * (x - mean);
  }
  out.variance = ss / static_cast<double>(series.size());
  if (!(out.variance > 0.0)) throw std::domain_error("autocorrelation of a constant series");
  return out;
}

inline double autocorrelation_at(const CenteredSeries& c, std::size_t lag) {
  const std::size_t m = c.values.size();
  double acc = 0.0;
  for (std::size_t t = 0; t + lag < m; ++t) acc += c.values[t] * c.values[t + lag];
  return acc / (static_cast<double>(m) * c.variance);
}

}  // namespace detail

/// Sample autocorrelations rho_0..rho_max_lag, biased (divide-by-M) estimator.
inline std::vector<double> acf(std::span<const double> series, std::size_t max_lag) {
  if (series.size() <= max_lag) throw std::invalid_argument("series shorter than max lag");
  const detail::CenteredSeries c = detail::center(series);
  std::vector<double> rho(max_lag + 1);
  for (std::size_t k = 0; k <= max_lag; ++k) rho[k] = detail::autocorrelation_at(c, k);
  return rho;
}

/// Integrated autocorrelation time, Geyer's initial positive sequence:
/// tau = -1 + 2 * sum_k (rho_2k + rho_2k+1), stopping at the first
/// non-positive pair.
inline double iact(std::span<const double> series) {
  const detail::CenteredSeries c = detail::center(series);
  const std::size_t m = series.size();
  double sum = 0.0;
  for (std::size_t k = 0; 2 * k + 1 < m; ++k) {
    const double pair = detail::autocorrelation_at(c, 2 * k) +
                        detail::autocorrelation_at(c, 2 * k + 1);
    if (pair <= 0.0) break;
    sum += pair;
  }
  return -1.0 + 2.0 * sum;
}

struct EssResult {
  double ess = 0.0;
  double ess_per_second = 0.0;
};

inline EssResult ess(std::span<const double> series, double elapsed_seconds) {
  if (!(elapsed_seconds > 0.0)) throw std::invalid_argument("elapsed time must be > 0");
  const double tau = iact(series);
  EssResult out;
  out.ess = static_cast<double>(series.size()) / tau;
  out.ess_per_second = out.ess / elapsed_seconds;
  return out;
}

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;
};

/// Equal-width bins over [min, max]; the maximum lands in the last bin.
inline Histogram histogram(std::span<const double> series, std::size_t bins) {
  if (series.empty()) throw std::invalid_argument("histogram of an empty series");
  if (bins < 1) throw std::invalid_argument("histogram needs at least one bin");
  const auto [lo_it, hi_it] = std::minmax_element(series.begin(), series.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const double width = (hi - lo) / static_cast<double>(bins);
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k) h.edges[k] = lo + width * static_cast<double>(k);
  h.edges.back() = hi;
  h.counts.assign(bins, 0);
  for (double x : series) {
    std::size_t k = width > 0.0 ? static_cast<std::size_t>((x - lo) / width) : 0;
    h.counts[std::min(k, bins - 1)] += 1;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Chain summaries

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
  double iact = 0.0;
  double ess = 0.0;
  double ess_per_second = 0.0;
  std::optional<double> mse;
};

struct ChainSummary {
  std::vector<ParameterSummary> parameters;
  double acceptance_rate = 0.0;
  std::size_t samples = 0;  // post burn-in
  double elapsed_seconds = 0.0;
};

/// Linear-interpolation quantile (type 7).
inline double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty series");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline std::vector<double> post_burn_in(const Chain& chain, Eigen::Index column) {
  std::vector<double> out;
  for (std::size_t k = chain.burn_in; k < chain.size(); ++k) {
    out.push_back(chain.samples(static_cast<Eigen::Index>(k), column));
  }
  return out;
}

/// R0 = beta / gamma per post-burn-in sample. Needs columns named "beta"
/// and "gamma".
inline std::vector<double> r0_series(const Chain& chain) {
  const auto find = [&](const std::string& name) {
    const auto it = std::find(chain.names.begin(), chain.names.end(), name);
    if (it == chain.names.end()) throw std::invalid_argument("chain has no " + name + " column");
    return static_cast<Eigen::Index>(it - chain.names.begin());
  };
  const Eigen::Index b = find("beta");
  const Eigen::Index g = find("gamma");
  std::vector<double> out;
  for (std::size_t k = chain.burn_in; k < chain.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    out.push_back(chain.samples(row, b) / chain.samples(row, g));
  }
  return out;
}

/// Mean over post-burn-in samples of (sample - truth)^2, per column.
inline std::vector<double> mse(const Chain& chain, std::span<const double> truth) {
  if (chain.size() <= chain.burn_in) throw std::invalid_argument("chain has no post-burn-in samples");
  if (truth.size() != static_cast<std::size_t>(chain.samples.cols())) {
    throw std::invalid_argument("one truth value per chain column required");
  }
  std::vector<double> out(truth.size(), 0.0);
  const double n = static_cast<double>(chain.size() - chain.burn_in);
  for (std::size_t c = 0; c < truth.size(); ++c) {
    for (std::size_t k = chain.burn_in; k < chain.size(); ++k) {
      const double d = chain.samples(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) - truth[c];
      out[c] += d * d;
    }
    out[c] /= n;
  }
  return out;
}

/// Burn-in is excluded from every statistic. A constant column (a chain that
/// never moved) reports IACT = +inf and ESS = 0.
inline ChainSummary summarize(const Chain& chain,
                              std::optional<std::vector<double>> truth = std::nullopt) {
  if (chain.size() <= chain.burn_in) throw std::invalid_argument("chain has no post-burn-in samples");
  ChainSummary out;
  out.samples = chain.size() - chain.burn_in;
  out.elapsed_seconds = chain.elapsed_seconds();
  std::size_t accepted = 0;
  for (std::size_t k = chain.burn_in; k < chain.size(); ++k) accepted += chain.accepted[k] ? 1 : 0;
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(out.samples);

  std::optional<std::vector<double>> errors;
  if (truth) errors = mse(chain, *truth);

  for (Eigen::Index c = 0; c < chain.samples.cols(); ++c) {
    const std::vector<double> xs = post_burn_in(chain, c);
    ParameterSummary p;
    p.name = static_cast<std::size_t>(c) < chain.names.size() ? chain.names[static_cast<std::size_t>(c)]
                                                              : "p" + std::to_string(c);
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    p.mean = mean;
    p.sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
    p.q025 = quantile(xs, 0.025);
    p.q50 = quantile(xs, 0.5);
    p.q975 = quantile(xs, 0.975);
    if (ss > 0.0 && xs.size() >= 2) {
      p.iact = iact(xs);
    } else {
      p.iact = std::numeric_limits<double>::infinity();
    }
    p.ess = static_cast<double>(xs.size()) / p.iact;
    p.ess_per_second = out.elapsed_seconds > 0.0 ? p.ess / out.elapsed_seconds : 0.0;
    if (errors) p.mse = (*errors)[static_cast<std::size_t>(c)];
    out.parameters.push_back(std::move(p));
  }
  return out;
}

}  // namespace pmcmc
