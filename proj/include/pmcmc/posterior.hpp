#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "pmcmc/epidemic_model.hpp"
#include "pmcmc/particle_filter.hpp"
#include "pmcmc/priors.hpp"

namespace pmcmc {

/// A target density evaluated at one point. `log_likelihood` is NaN for
/// targets that have none (analytic test targets).
struct Evaluation {
  double log_density = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd gradient;
  double log_likelihood = std::numeric_limits<double>::quiet_NaN();
};

/// log p(theta) + log p^(y | theta) over the inferred coordinates, with the
/// particle filter run under one frozen CRN seed.
class FilterPosterior {
 public:
  FilterPosterior(ModelKind kind, ParameterVector base, ObservationModelParams obs,
                  InitialStateSpec initial, ObservationSeries observations,
                  PriorSpec priors, FilterConfig filter)
      : kind_(kind),
        base_(base),
        obs_(obs),
        initial_(initial),
        observations_(std::move(observations)),
        priors_(std::move(priors)),
        filter_(filter) {
    filter_.validate();
    for (Param p : base_.inferred_params()) (void)priors_.get(p);
  }

  std::size_t dimension() const { return base_.inferred_count(); }
  const ParameterVector& base() const { return base_; }
  const FilterConfig& filter_config() const { return filter_; }

  double log_prior(const Eigen::VectorXd& theta) const {
    double lp = 0.0;
    Eigen::Index k = 0;
    for (Param p : base_.inferred_params()) lp += priors_.get(p).log_density(theta[k++]);
    return lp;
  }

  Eigen::VectorXd d_log_prior(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd g(theta.size());
    Eigen::Index k = 0;
    for (Param p : base_.inferred_params()) {
      g[k] = priors_.get(p).d_log_density(theta[k]);
      ++k;
    }
    return g;
  }

  FilterResult filter(const Eigen::VectorXd& theta) const {
    const CompartmentalModel model(kind_, base_.with_inferred(theta), obs_, initial_);
    return run_filter(model, observations_, filter_);
  }

  /// Points outside the prior support get log density -inf without running
  /// the filter. So do points where the filter fails.
  Evaluation operator()(const Eigen::VectorXd& theta) const {
    Evaluation out;
    out.gradient = Eigen::VectorXd::Zero(theta.size());
    const double lp = log_prior(theta);
    if (!std::isfinite(lp)) return out;
    FilterResult fr;
    try {
      fr = filter(theta);
    } catch (const FilterError&) {
      return out;  // e.g. a trajectory that left the state space; scored as -inf
    } catch (const DegenerateWeights&) {
      return out;
    }
    out.log_likelihood = fr.log_likelihood;
    out.log_density = lp + fr.log_likelihood;
    out.gradient = d_log_prior(theta) + fr.gradient;
    return out;
  }

 private:
  ModelKind kind_;
  ParameterVector base_;
  ObservationModelParams obs_;
  InitialStateSpec initial_;
  ObservationSeries observations_;
  PriorSpec priors_;
  FilterConfig filter_;
};

/// Target on phi = log(theta): adds the Jacobian sum(phi) and maps the
/// gradient by the chain rule, d/dphi = theta * d/dtheta + 1.
template <class Target>
class LogTransformed {
 public:
  explicit LogTransformed(const Target& target) : target_(&target) {}

  Evaluation operator()(const Eigen::VectorXd& phi) const {
    Evaluation out;
    out.gradient = Eigen::VectorXd::Zero(phi.size());
    if (!phi.allFinite()) return out;
    const Eigen::VectorXd theta = phi.array().exp();
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      if (!(theta[k] > 0.0) || !std::isfinite(theta[k])) return out;
    }
    Evaluation inner = (*target_)(theta);
    out.log_likelihood = inner.log_likelihood;
    if (!std::isfinite(inner.log_density)) return out;
    out.log_density = inner.log_density + phi.sum();
    out.gradient = theta.cwiseProduct(inner.gradient) + Eigen::VectorXd::Ones(phi.size());
    return out;
  }

 private:
  const Target* target_;
};

inline Evaluation log_posterior_and_grad(const Eigen::VectorXd& phi,
                                         const FilterPosterior& posterior) {
  return LogTransformed<FilterPosterior>(posterior)(phi);
}

}  // namespace pmcmc
