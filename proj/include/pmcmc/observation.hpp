#pragma once

// Log-normal syndromic observation model: log y ~ N(b * i^phi, sigma^2).
// Weights use the Gaussian density of log y; the -log y Jacobian is constant
// in theta and is omitted.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pmcmc/compartments.hpp"

namespace pmcmc {

struct ObservationModelParams {
  double b = 0.25;
  double phi = 1.07;
  double sigma = 0.0012;
  int population = 5000;

  void validate() const {
    if (!(b > 0.0) || !(phi > 0.0) || !(sigma > 0.0) || population <= 0 ||
        !std::isfinite(b) || !std::isfinite(phi) || !std::isfinite(sigma)) {
      throw std::invalid_argument(
          "observation parameters b, phi, sigma and population must be positive");
    }
  }
};

struct Observation {
  int day = 0;
  double y = 1.0;
};

class ObservationSeries {
 public:
  ObservationSeries() = default;

  explicit ObservationSeries(std::vector<Observation> points)
      : points_(std::move(points)) {
    for (std::size_t k = 0; k < points_.size(); ++k) {
      if (!(points_[k].y > 0.0) || !std::isfinite(points_[k].y)) {
        throw std::invalid_argument("observation at day " +
                                    std::to_string(points_[k].day) +
                                    " must be positive and finite");
      }
      if (points_[k].day < 1 && k == 0) {
        throw std::invalid_argument("observation days start at 1");
      }
      if (k > 0 && points_[k].day <= points_[k - 1].day) {
        throw std::invalid_argument("observation days must be strictly increasing");
      }
    }
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Observation& operator[](std::size_t k) const { return points_[k]; }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }

  /// First `count` observations.
  ObservationSeries prefix(std::size_t count) const {
    if (count > points_.size()) count = points_.size();
    return ObservationSeries(
        std::vector<Observation>(points_.begin(), points_.begin() + count));
  }

 private:
  std::vector<Observation> points_;
};

/// h(i) = b * i^phi with h(0) = 0.
inline double observation_mean(double infected, const ObservationModelParams& obs) {
  if (infected < 0.0) throw std::invalid_argument("infected fraction must be >= 0");
  if (infected == 0.0) return 0.0;
  return obs.b * std::pow(infected, obs.phi);
}

/// dh/di = b * phi * i^(phi-1). At i = 0 the slope is defined as 0 unless
/// phi == 1.
inline double observation_mean_slope(double infected, const ObservationModelParams& obs) {
  if (infected < 0.0) throw std::invalid_argument("infected fraction must be >= 0");
  if (infected == 0.0) return obs.phi == 1.0 ? obs.b : 0.0;
  return obs.b * obs.phi * std::pow(infected, obs.phi - 1.0);
}

inline double log_obs_density(double y, const CompartmentState& x,
                              const ObservationModelParams& obs) {
  if (!(y > 0.0)) throw std::invalid_argument("observation must be positive");
  const double resid = std::log(y) - observation_mean(x.i, obs);
  const double var = obs.sigma * obs.sigma;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * resid * resid / var;
}

/// Gradient of log_obs_density over the inferred parameters through di/dtheta.
/// b, phi and sigma are known constants, so only the mean path contributes.
inline Eigen::VectorXd d_log_obs_density(double y, const CompartmentState& x,
                                         const StateSensitivity& dx,
                                         const ObservationModelParams& obs) {
  if (!(y > 0.0)) throw std::invalid_argument("observation must be positive");
  const double resid = std::log(y) - observation_mean(x.i, obs);
  const double d_mean = resid / (obs.sigma * obs.sigma);
  const double slope = observation_mean_slope(x.i, obs);
  return (d_mean * slope) * dx.row(2).transpose();
}

}  // namespace pmcmc
