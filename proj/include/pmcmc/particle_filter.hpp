#pragma once

// Bootstrap particle filter that also propagates state sensitivities and
// log-weight gradients, giving log p(y_{1:T} | theta) and its gradient from
// one pass.
//
// All randomness is drawn from a CrnLayout keyed by FilterConfig::seed:
//   dynamics noise : {dynamics_noise, day, particle, channel}, one normal each
//   resampling     : {resampling, day, 0, 0}, N uniforms in offspring order
//   initial state  : {initial_state, 0, particle, channel}
// With the seed fixed the estimate is a deterministic, piecewise smooth
// function of theta.
//
// Weights live in the log domain. When a resampling step fires, every
// offspring's log-weight is reset to log((1/N) sum w) and its log-weight
// gradient to sum w~ dlog(w)/dtheta, the exact derivative of that reset
// value. The returned log-likelihood log((1/N) sum w_T) therefore already
// accumulates every resampling epoch, and the gradient sum w~_T dlog(w_T) is
// the derivative of the returned estimate whenever the ancestor vectors are
// locally constant in theta.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmcmc/observation.hpp"
#include "pmcmc/rng.hpp"

namespace pmcmc {

class FilterError : public std::runtime_error {
 public:
  FilterError(const std::string& what, int time, std::size_t particle)
      : std::runtime_error(what + " (time " + std::to_string(time) + ", particle " +
                           std::to_string(particle) + ")"),
        time_(time),
        particle_(particle) {}

  int time() const { return time_; }
  std::size_t particle() const { return particle_; }

 private:
  int time_;
  std::size_t particle_;
};

class DegenerateWeights : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FilterConfig {
  std::size_t particles = 100;
  /// Resample before a step when Neff <= threshold. Defaults to N / 2.
  double resample_threshold = 50.0;
  std::uint64_t seed = 0;
  bool record_trace = false;

  static FilterConfig with_default_threshold(std::size_t particles, std::uint64_t seed) {
    FilterConfig config;
    config.particles = particles;
    config.resample_threshold = static_cast<double>(particles) / 2.0;
    config.seed = seed;
    return config;
  }

  void validate() const {
    if (particles < 1) throw std::invalid_argument("particle count must be >= 1");
    if (!(resample_threshold > 0.0) ||
        resample_threshold > static_cast<double>(particles)) {
      throw std::invalid_argument("resample threshold must lie in (0, N]");
    }
  }
};

struct FilterStep {
  int time = 0;
  double neff = 0.0;
  bool resampled = false;
  double loglik_so_far = 0.0;
};

struct FilterResult {
  double log_likelihood = 0.0;
  Eigen::VectorXd gradient;
  std::size_t resample_count = 0;
  std::size_t clamp_count = 0;
  /// Hash of every resampling time and ancestor vector. Equal fingerprints
  /// at two parameter values mean the same resampling path was taken.
  std::uint64_t ancestry_fingerprint = 0;
  std::vector<FilterStep> trace;
};

template <class Model>
struct ParticleCloud {
  std::vector<typename Model::State> states;
  std::vector<typename Model::Sensitivity> sensitivities;
  std::vector<double> log_weights;
  /// One column per particle: d log(w_i) / d theta.
  Eigen::MatrixXd weight_gradients;

  std::size_t size() const { return states.size(); }
};

inline double log_mean_exp(std::span<const double> log_w) {
  if (log_w.empty()) throw std::invalid_argument("log_mean_exp of empty range");
  const double top = *std::max_element(log_w.begin(), log_w.end());
  if (std::isnan(top)) throw DegenerateWeights("NaN log-weight");
  if (top == -std::numeric_limits<double>::infinity()) return top;
  double acc = 0.0;
  for (double lw : log_w) acc += std::exp(lw - top);
  return top + std::log(acc / static_cast<double>(log_w.size()));
}

/// Normalized weights w~_i = w_i / sum_j w_j from log-weights.
inline std::vector<double> normalize_log_weights(std::span<const double> log_w) {
  if (log_w.empty()) throw DegenerateWeights("no particles");
  const double top = *std::max_element(log_w.begin(), log_w.end());
  if (!std::isfinite(top)) throw DegenerateWeights("all weights are zero or invalid");
  std::vector<double> w(log_w.size());
  double total = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (std::isnan(log_w[k])) throw DegenerateWeights("NaN log-weight");
    w[k] = std::exp(log_w[k] - top);
    total += w[k];
  }
  for (double& x : w) x /= total;
  return w;
}

/// Neff = 1 / sum w~^2 for normalized weights.
inline double effective_sample_size(std::span<const double> normalized) {
  double sum = 0.0;
  double sq = 0.0;
  for (double w : normalized) {
    sum += w;
    sq += w * w;
  }
  if (!(sum > 0.0) || !(sq > 0.0)) {
    throw DegenerateWeights("effective sample size of all-zero weights");
  }
  return 1.0 / sq;
}

template <class Model>
double effective_sample_size(const ParticleCloud<Model>& cloud) {
  const std::vector<double> w = normalize_log_weights(cloud.log_weights);
  return effective_sample_size(std::span<const double>(w));
}

/// Uniform weights (log w = 0), zero sensitivities and zero weight gradients.
template <class Model>
ParticleCloud<Model> init_particles(const Model& model, const FilterConfig& config) {
  config.validate();
  const CrnLayout layout(config.seed);
  const std::size_t n = config.particles;
  ParticleCloud<Model> cloud;
  cloud.states.reserve(n);
  for (std::size_t k = 0; k < n; ++k) cloud.states.push_back(model.initial_state(layout, k));
  cloud.sensitivities.assign(n, model.initial_sensitivity());
  cloud.log_weights.assign(n, 0.0);
  cloud.weight_gradients = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(model.parameter_count()), static_cast<Eigen::Index>(n));
  return cloud;
}

/// log w_i += log p(y | x_i); dlog(w_i) += d log p(y | x_i) / d theta.
template <class Model>
void weight_and_gradient_update(ParticleCloud<Model>& cloud, const Model& model, double y,
                                int time = 0) {
  for (std::size_t k = 0; k < cloud.size(); ++k) {
    const double ld = model.log_observation(y, cloud.states[k]);
    if (!std::isfinite(ld)) throw FilterError("non-finite observation density", time, k);
    cloud.log_weights[k] += ld;
    model.add_log_observation_gradient(y, cloud.states[k], cloud.sensitivities[k],
                                       cloud.weight_gradients.col(static_cast<Eigen::Index>(k)));
  }
}

/// N ancestor indices drawn with probability proportional to the weights,
/// using one uniform per offspring from `stream`.
inline std::vector<std::size_t> draw_ancestors(std::span<const double> normalized,
                                               RandomStream& stream) {
  const std::size_t n = normalized.size();
  if (n == 0) throw DegenerateWeights("no particles to resample");
  std::vector<double> cumulative(n);
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!(normalized[k] >= 0.0)) throw DegenerateWeights("negative or NaN weight");
    acc += normalized[k];
    cumulative[k] = acc;
  }
  if (!(acc > 0.0)) throw DegenerateWeights("cannot resample all-zero weights");
  std::vector<std::size_t> ancestors(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double u = stream.uniform01() * acc;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    ancestors[j] = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), n - 1);
  }
  return ancestors;
}

/// Multinomial resampling with CRN uniforms. States and sensitivities are
/// copied from the ancestors; weights and weight gradients are reset to the
/// epoch values described at the top of this file. Returns the ancestors.
template <class Model>
std::vector<std::size_t> multinomial_resample_crn(ParticleCloud<Model>& cloud,
                                                  RandomStream& stream) {
  const std::vector<double> w = normalize_log_weights(cloud.log_weights);
  const std::vector<std::size_t> ancestors = draw_ancestors(w, stream);

  const double reset_log_w = log_mean_exp(cloud.log_weights);
  Eigen::VectorXd reset_grad = Eigen::VectorXd::Zero(cloud.weight_gradients.rows());
  for (std::size_t k = 0; k < w.size(); ++k) {
    reset_grad += w[k] * cloud.weight_gradients.col(static_cast<Eigen::Index>(k));
  }

  auto states = cloud.states;
  auto sens = cloud.sensitivities;
  for (std::size_t j = 0; j < ancestors.size(); ++j) {
    cloud.states[j] = states[ancestors[j]];
    cloud.sensitivities[j] = sens[ancestors[j]];
    cloud.weight_gradients.col(static_cast<Eigen::Index>(j)) = reset_grad;
  }
  std::fill(cloud.log_weights.begin(), cloud.log_weights.end(), reset_log_w);
  return ancestors;
}

namespace detail {

inline std::uint64_t fingerprint_mix(std::uint64_t h, std::uint64_t value) {
  return mix_seed(h ^ value, 0x5bd1e995ull);
}

}  // namespace detail

/// One full filter pass. Model requirements:
///   State, Sensitivity types; parameter_count(); noise_channels();
///   initial_state(layout, k); initial_sensitivity();
///   bool step(State&, Sensitivity&, span<const double> z)  (true = clamped);
///   log_observation(y, x); add_log_observation_gradient(y, x, dx, out).
template <class Model>
FilterResult run_filter(const Model& model, const ObservationSeries& observations,
                        const FilterConfig& config) {
  config.validate();
  if (observations.empty()) throw std::invalid_argument("no observations to filter");

  const CrnLayout layout(config.seed);
  ParticleCloud<Model> cloud = init_particles(model, config);
  const std::size_t n = cloud.size();
  const std::size_t channels = model.noise_channels();
  std::vector<double> z(channels);

  FilterResult result;
  int day = 0;
  for (const Observation& ob : observations) {
    const int t = ob.day;

    const std::vector<double> w = normalize_log_weights(cloud.log_weights);
    const double neff = effective_sample_size(std::span<const double>(w));
    bool resampled = false;
    if (neff <= config.resample_threshold) {
      RandomStream stream = layout.derive(
          {StreamPurpose::resampling, static_cast<std::uint64_t>(t), 0, 0});
      const std::vector<std::size_t> ancestors = multinomial_resample_crn(cloud, stream);
      result.ancestry_fingerprint =
          detail::fingerprint_mix(result.ancestry_fingerprint, static_cast<std::uint64_t>(t));
      for (std::size_t a : ancestors) {
        result.ancestry_fingerprint = detail::fingerprint_mix(result.ancestry_fingerprint, a);
      }
      ++result.resample_count;
      resampled = true;
    }

    for (int step_day = day + 1; step_day <= t; ++step_day) {
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t c = 0; c < channels; ++c) {
          RandomStream stream = layout.derive({StreamPurpose::dynamics_noise,
                                               static_cast<std::uint64_t>(step_day),
                                               static_cast<std::uint64_t>(k),
                                               static_cast<std::uint32_t>(c)});
          z[c] = stream.standard_normal();
        }
        try {
          if (model.step(cloud.states[k], cloud.sensitivities[k], z)) ++result.clamp_count;
        } catch (const std::invalid_argument& e) {
          throw FilterError(e.what(), step_day, k);
        }
      }
    }
    day = t;

    try {
      weight_and_gradient_update(cloud, model, ob.y, t);
    } catch (const std::invalid_argument& e) {
      throw FilterError(e.what(), t, 0);
    }

    if (config.record_trace) {
      result.trace.push_back({t, neff, resampled, log_mean_exp(cloud.log_weights)});
    }
  }

  result.log_likelihood = log_mean_exp(cloud.log_weights);
  const std::vector<double> w = normalize_log_weights(cloud.log_weights);
  result.gradient = Eigen::VectorXd::Zero(cloud.weight_gradients.rows());
  for (std::size_t k = 0; k < n; ++k) {
    result.gradient += w[k] * cloud.weight_gradients.col(static_cast<Eigen::Index>(k));
  }
  if (!std::isfinite(result.log_likelihood) || !result.gradient.allFinite()) {
    throw FilterError("non-finite likelihood or gradient", day, 0);
  }
  return result;
}

}  // namespace pmcmc
