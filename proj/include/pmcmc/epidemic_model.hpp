#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "pmcmc/compartments.hpp"
#include "pmcmc/observation.hpp"
#include "pmcmc/parameters.hpp"
#include "pmcmc/rng.hpp"

namespace pmcmc {

/// Noise channels within a dynamics-noise stream address.
enum NoiseChannel : std::uint32_t {
  kChannelBeta = 0,
  kChannelGamma = 1,
  kChannelDelta = 2,
  kChannelObservation = 3,
};

/// Initial compartments: either one fixed state, or per-particle uniform
/// draws of the exposed and infected fractions (s = 1 - e - i, r = 0).
/// For SIR the uniform form draws only i.
class InitialStateSpec {
 public:
  static InitialStateSpec fixed(const CompartmentState& state) {
    if (!state.is_finite() || state.s < 0 || state.e < 0 || state.i < 0 ||
        state.r < 0 || std::abs(state.total() - 1.0) > 1e-12) {
      throw std::invalid_argument(
          "initial compartments must be non-negative and sum to 1");
    }
    InitialStateSpec spec;
    spec.fixed_ = state;
    return spec;
  }

  static InitialStateSpec uniform(double lo, double hi) {
    if (!(lo >= 0.0) || !(hi > lo) || !(hi < 0.5)) {
      throw std::invalid_argument("uniform initial range must satisfy 0 <= lo < hi < 0.5");
    }
    InitialStateSpec spec;
    spec.is_uniform_ = true;
    spec.lo_ = lo;
    spec.hi_ = hi;
    return spec;
  }

  bool is_uniform() const { return is_uniform_; }
  const CompartmentState& fixed_state() const { return fixed_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  CompartmentState sample(ModelKind kind, const CrnLayout& layout,
                          std::size_t particle) const {
    if (!is_uniform_) {
      if (kind == ModelKind::sir && fixed_.e != 0.0) {
        throw std::invalid_argument("SIR initial state must have e = 0");
      }
      return fixed_;
    }
    CompartmentState x;
    auto draw = [&](std::uint32_t channel) {
      RandomStream stream = layout.derive(
          {StreamPurpose::initial_state, 0, static_cast<std::uint64_t>(particle), channel});
      return lo_ + (hi_ - lo_) * stream.uniform01();
    };
    x.e = kind == ModelKind::seir ? draw(0) : 0.0;
    x.i = draw(1);
    x.r = 0.0;
    x.s = 1.0 - x.e - x.i;
    return x;
  }

 private:
  InitialStateSpec() = default;

  CompartmentState fixed_{};
  bool is_uniform_ = false;
  double lo_ = 0.0;
  double hi_ = 0.0;
};

/// SIR/SEIR dynamics and observation density bound to one parameter vector,
/// in the shape the particle filter expects.
class CompartmentalModel {
 public:
  using State = CompartmentState;
  using Sensitivity = StateSensitivity;

  CompartmentalModel(ModelKind kind, ParameterVector theta,
                     ObservationModelParams obs, InitialStateSpec initial)
      : kind_(kind), theta_(theta), obs_(obs), initial_(initial) {
    obs_.validate();
  }

  ModelKind kind() const { return kind_; }
  const ParameterVector& theta() const { return theta_; }
  const ObservationModelParams& observation() const { return obs_; }

  std::size_t parameter_count() const { return theta_.inferred_count(); }

  std::size_t noise_channels() const { return kind_ == ModelKind::sir ? 2 : 3; }

  State initial_state(const CrnLayout& layout, std::size_t particle) const {
    return initial_.sample(kind_, layout, particle);
  }

  Sensitivity initial_sensitivity() const {
    return zero_sensitivity(parameter_count());
  }

  /// Returns true if any compartment was clamped.
  bool step(State& x, Sensitivity& dx, std::span<const double> z) const {
    NoiseDraws draws{z[kChannelBeta], z[kChannelGamma],
                     kind_ == ModelKind::seir ? z[kChannelDelta] : 0.0};
    return step_in_place(kind_, x, dx, theta_, draws, obs_.population) != kClampNone;
  }

  double log_observation(double y, const State& x) const {
    return log_obs_density(y, x, obs_);
  }

  void add_log_observation_gradient(double y, const State& x, const Sensitivity& dx,
                                    Eigen::Ref<Eigen::VectorXd> out) const {
    out += d_log_obs_density(y, x, dx, obs_);
  }

 private:
  ModelKind kind_;
  ParameterVector theta_;
  ObservationModelParams obs_;
  InitialStateSpec initial_;
};

struct SimulatedEpidemic {
  std::vector<CompartmentState> path;  // days 0..T
  ObservationSeries observations;      // days 1..T
  std::size_t clamp_count = 0;
};

/// Forward simulation of one latent path (particle index 0 of the layout)
/// plus log-normal observations on days 1..T.
inline SimulatedEpidemic simulate_epidemic(ModelKind kind, const ParameterVector& theta,
                                           const ObservationModelParams& obs, int days,
                                           const InitialStateSpec& initial,
                                           std::uint64_t seed) {
  if (days < 1) throw std::invalid_argument("simulation needs at least one day");
  obs.validate();
  const CrnLayout layout(seed);
  SimulatedEpidemic sim;
  sim.path.reserve(static_cast<std::size_t>(days) + 1);
  sim.path.push_back(initial.sample(kind, layout, 0));

  std::vector<Observation> points;
  points.reserve(static_cast<std::size_t>(days));
  for (int t = 1; t <= days; ++t) {
    auto draw = [&](std::uint32_t channel) {
      RandomStream stream = layout.derive(
          {StreamPurpose::dynamics_noise, static_cast<std::uint64_t>(t), 0, channel});
      return stream.standard_normal();
    };
    const NoiseDraws z{draw(kChannelBeta), draw(kChannelGamma),
                       kind == ModelKind::seir ? draw(kChannelDelta) : 0.0};
    const StepOutcome out = model_step(kind, sim.path.back(), theta, z, obs.population);
    if (out.clamped != kClampNone) ++sim.clamp_count;
    sim.path.push_back(out.state);

    const double log_y =
        observation_mean(out.state.i, obs) + obs.sigma * draw(kChannelObservation);
    points.push_back({t, std::exp(log_y)});
  }
  sim.observations = ObservationSeries(std::move(points));
  return sim;
}

}  // namespace pmcmc
