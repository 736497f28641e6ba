#pragma once

// Outer MCMC loops for particle-MCMC: random-walk Metropolis-Hastings on the
// constrained scale and the No-U-Turn Sampler (slice-based tree building,
// fixed step size, identity mass matrix) on phi = log(theta).
//
// Sampler randomness for iteration k comes from a CrnLayout keyed by
// ChainSettings::seed:
//   {proposal, k, 0, 0} : MH increments then the accept uniform, or the NUTS
//                          slice, direction and candidate uniforms in order
//   {momentum, k, 0, 0} : NUTS initial momentum

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pmcmc/posterior.hpp"
#include "pmcmc/rng.hpp"

namespace pmcmc {

enum class SamplerKind { mh, nuts };

inline std::string_view sampler_name(SamplerKind kind) {
  return kind == SamplerKind::mh ? "mh" : "nuts";
}

inline std::optional<SamplerKind> sampler_from_name(std::string_view name) {
  if (name == "mh") return SamplerKind::mh;
  if (name == "nuts") return SamplerKind::nuts;
  return std::nullopt;
}

struct NutsConfig {
  double step_size = 0.0055;
  int max_tree_depth = 10;
  /// A leapfrog state whose joint log density falls this far below the
  /// slice is divergent and terminates the tree.
  double max_energy_error = 1000.0;

  void validate() const {
    if (!(step_size > 0.0)) throw std::invalid_argument("NUTS step size must be > 0");
    if (max_tree_depth < 0) throw std::invalid_argument("max tree depth must be >= 0");
  }
};

// ---------------------------------------------------------------------------
// Metropolis-Hastings

struct MhOutcome {
  Eigen::VectorXd theta;
  Evaluation eval;
  bool accepted = false;
};

/// Gaussian random-walk proposal theta' ~ N(theta, diag(step^2)). The
/// proposal is symmetric so the q-ratio cancels. Points the target scores as
/// -inf (outside prior support) are always rejected.
template <class Target>
MhOutcome mh_step(const Eigen::VectorXd& theta, const Evaluation& current,
                  const Eigen::VectorXd& step_sizes, const Target& target,
                  RandomStream& stream) {
  if (step_sizes.size() != theta.size()) {
    throw std::invalid_argument("one MH step size per coordinate required");
  }
  Eigen::VectorXd proposal(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    proposal[k] = theta[k] + step_sizes[k] * stream.standard_normal();
  }
  const double u = stream.uniform01();

  Evaluation next = target(proposal);
  if (!std::isfinite(next.log_density)) return {theta, current, false};
  const double log_alpha = std::min(0.0, next.log_density - current.log_density);
  if (u < std::exp(log_alpha)) return {proposal, std::move(next), true};
  return {theta, current, false};
}

// ---------------------------------------------------------------------------
// Hamiltonian pieces

struct PhasePoint {
  Eigen::VectorXd position;
  Eigen::VectorXd momentum;
  Evaluation eval;  // target at `position`

  /// log pi(position) - 1/2 |momentum|^2, i.e. -H.
  double joint() const {
    if (!std::isfinite(eval.log_density)) return -std::numeric_limits<double>::infinity();
    return eval.log_density - 0.5 * momentum.squaredNorm();
  }
};

struct LeapfrogResult {
  PhasePoint point;
  bool divergent = false;
};

/// Half-step momentum, full-step position, half-step momentum, with
/// U = -log pi and K = 1/2 m^T m. A negative step integrates backwards.
template <class Target>
LeapfrogResult leapfrog(const PhasePoint& start, double step, const Target& target) {
  LeapfrogResult out;
  Eigen::VectorXd momentum = start.momentum + 0.5 * step * start.eval.gradient;
  out.point.position = start.position + step * momentum;
  out.point.eval = target(out.point.position);
  if (!std::isfinite(out.point.eval.log_density) || !out.point.eval.gradient.allFinite()) {
    out.divergent = true;
    out.point.momentum = momentum;
    return out;
  }
  out.point.momentum = momentum + 0.5 * step * out.point.eval.gradient;
  return out;
}

/// True while the trajectory has not started to double back:
/// (p+ - p-) . m- >= 0 and (p+ - p-) . m+ >= 0.
inline bool no_u_turn(const Eigen::VectorXd& position_minus,
                      const Eigen::VectorXd& position_plus,
                      const Eigen::VectorXd& momentum_minus,
                      const Eigen::VectorXd& momentum_plus) {
  const Eigen::VectorXd span = position_plus - position_minus;
  return span.dot(momentum_minus) >= 0.0 && span.dot(momentum_plus) >= 0.0;
}

struct NutsOutcome {
  PhasePoint point;
  bool moved = false;
  bool divergent = false;
  int depth = 0;
  std::size_t leapfrog_steps = 0;
};

namespace detail {

template <class Target>
class NutsTreeBuilder {
 public:
  struct Tree {
    PhasePoint minus;
    PhasePoint plus;
    PhasePoint candidate;
    double count = 0.0;  // states inside the slice
    bool valid = true;
  };

  NutsTreeBuilder(const Target& target, const NutsConfig& config, double log_slice,
                  RandomStream& stream)
      : target_(target), config_(config), log_slice_(log_slice), stream_(stream) {}

  Tree build(const PhasePoint& from, int direction, int depth) {
    if (depth == 0) {
      LeapfrogResult r = leapfrog(from, direction * config_.step_size, target_);
      ++leapfrog_steps_;
      const double joint = r.point.joint();
      Tree t;
      t.count = log_slice_ <= joint ? 1.0 : 0.0;
      t.valid = !r.divergent && log_slice_ < joint + config_.max_energy_error;
      if (!t.valid) divergent_ = true;
      t.minus = r.point;
      t.plus = r.point;
      t.candidate = std::move(r.point);
      return t;
    }
    Tree t = build(from, direction, depth - 1);
    if (!t.valid) return t;
    Tree outer = build(direction < 0 ? t.minus : t.plus, direction, depth - 1);
    if (direction < 0) {
      t.minus = std::move(outer.minus);
    } else {
      t.plus = std::move(outer.plus);
    }
    const double total = t.count + outer.count;
    if (total > 0.0 && stream_.uniform01() < outer.count / total) {
      t.candidate = std::move(outer.candidate);
    }
    t.valid = outer.valid && no_u_turn(t.minus.position, t.plus.position,
                                       t.minus.momentum, t.plus.momentum);
    t.count = total;
    return t;
  }

  std::size_t leapfrog_steps() const { return leapfrog_steps_; }
  bool divergent() const { return divergent_; }

 private:
  const Target& target_;
  const NutsConfig& config_;
  double log_slice_;
  RandomStream& stream_;
  std::size_t leapfrog_steps_ = 0;
  bool divergent_ = false;
};

}  // namespace detail

/// One NUTS transition from `position` (with its evaluation `current`).
/// Subtrees of depth 0, 1, ... are appended in random directions until a
/// U-turn, a divergence, or `max_tree_depth` subtrees (at least one).
template <class Target>
NutsOutcome nuts_step(const Eigen::VectorXd& position, const Evaluation& current,
                      const NutsConfig& config, const Target& target,
                      RandomStream& momentum_stream, RandomStream& stream) {
  config.validate();
  PhasePoint start{position, Eigen::VectorXd(position.size()), current};
  for (Eigen::Index k = 0; k < position.size(); ++k) {
    start.momentum[k] = momentum_stream.standard_normal();
  }
  const double log_slice = start.joint() + std::log(1.0 - stream.uniform01());

  detail::NutsTreeBuilder<Target> builder(target, config, log_slice, stream);
  PhasePoint minus = start;
  PhasePoint plus = start;
  NutsOutcome out;
  out.point = start;
  double count = 1.0;
  const int max_subtrees = std::max(1, config.max_tree_depth);

  for (int depth = 0; depth < max_subtrees; ++depth) {
    const int direction = stream.uniform01() < 0.5 ? -1 : 1;
    auto tree = builder.build(direction < 0 ? minus : plus, direction, depth);
    if (direction < 0) {
      minus = tree.minus;
    } else {
      plus = tree.plus;
    }
    out.depth = depth + 1;
    if (tree.valid && stream.uniform01() < tree.count / count) {
      out.point = std::move(tree.candidate);
      out.moved = true;
    }
    count += tree.count;
    if (!tree.valid ||
        !no_u_turn(minus.position, plus.position, minus.momentum, plus.momentum)) {
      break;
    }
  }
  out.leapfrog_steps = builder.leapfrog_steps();
  out.divergent = builder.divergent();
  out.moved = out.moved && out.point.position != position;
  return out;
}

// ---------------------------------------------------------------------------
// Chains

struct Chain {
  SamplerKind kind = SamplerKind::mh;
  std::vector<std::string> names;
  Eigen::MatrixXd samples;  // iterations x inferred parameters, constrained scale
  std::vector<double> log_likelihood;
  std::vector<bool> accepted;
  std::vector<double> cum_seconds;
  std::size_t burn_in = 0;

  std::size_t size() const { return static_cast<std::size_t>(samples.rows()); }
  double elapsed_seconds() const { return cum_seconds.empty() ? 0.0 : cum_seconds.back(); }
};

/// Space the NUTS trajectory lives in. PMCMC targets over positive rates use
/// `log`; analytic test targets on R^d use `identity`.
enum class NutsSpace { log, identity };

struct ChainSettings {
  SamplerKind kind = SamplerKind::mh;
  std::size_t iterations = 50;
  std::size_t burn_in = 0;
  Eigen::VectorXd mh_step_sizes;
  NutsConfig nuts;
  NutsSpace nuts_space = NutsSpace::log;
  std::uint64_t seed = 0;
  bool record_time = true;
  std::vector<std::string> names;

  void validate(Eigen::Index dimension) const {
    if (iterations < 1) throw std::invalid_argument("chain needs at least one iteration");
    if (burn_in >= iterations) throw std::invalid_argument("burn-in must be < iterations");
    if (kind == SamplerKind::mh && mh_step_sizes.size() != dimension) {
      throw std::invalid_argument("MH needs one step size per inferred parameter");
    }
    if (kind == SamplerKind::mh && (mh_step_sizes.array() <= 0.0).any()) {
      throw std::invalid_argument("MH step sizes must be > 0");
    }
    if (kind == SamplerKind::nuts) nuts.validate();
  }
};

template <class Target>
Chain run_chain(const Target& target, const Eigen::VectorXd& init,
                const ChainSettings& settings) {
  settings.validate(init.size());
  const std::size_t m = settings.iterations;
  const CrnLayout layout(settings.seed);

  Chain chain;
  chain.kind = settings.kind;
  chain.names = settings.names;
  chain.burn_in = settings.burn_in;
  chain.samples.resize(static_cast<Eigen::Index>(m), init.size());
  chain.log_likelihood.reserve(m);
  chain.accepted.reserve(m);
  chain.cum_seconds.reserve(m);

  const auto started = std::chrono::steady_clock::now();
  auto record = [&](std::size_t k, const Eigen::VectorXd& theta, const Evaluation& eval,
                    bool accepted) {
    chain.samples.row(static_cast<Eigen::Index>(k)) = theta.transpose();
    chain.log_likelihood.push_back(eval.log_likelihood);
    chain.accepted.push_back(accepted);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    chain.cum_seconds.push_back(settings.record_time ? elapsed.count() : 0.0);
  };

  if (settings.kind == SamplerKind::mh) {
    Eigen::VectorXd theta = init;
    Evaluation current = target(theta);
    for (std::size_t k = 0; k < m; ++k) {
      RandomStream stream = layout.derive({StreamPurpose::proposal, k, 0, 0});
      MhOutcome step = mh_step(theta, current, settings.mh_step_sizes, target, stream);
      theta = std::move(step.theta);
      current = std::move(step.eval);
      record(k, theta, current, step.accepted);
    }
    return chain;
  }

  auto run_nuts = [&](const auto& space_target, Eigen::VectorXd position, auto to_output) {
    Evaluation current = space_target(position);
    for (std::size_t k = 0; k < m; ++k) {
      RandomStream momentum = layout.derive({StreamPurpose::momentum, k, 0, 0});
      RandomStream stream = layout.derive({StreamPurpose::proposal, k, 0, 0});
      NutsOutcome step = nuts_step(position, current, settings.nuts, space_target,
                                   momentum, stream);
      if (step.moved) {
        position = std::move(step.point.position);
        current = std::move(step.point.eval);
      }
      record(k, to_output(position), current, step.moved);
    }
  };

  if (settings.nuts_space == NutsSpace::log) {
    if ((init.array() <= 0.0).any()) {
      throw std::invalid_argument("log-space NUTS needs a positive initial point");
    }
    const LogTransformed<Target> transformed(target);
    run_nuts(transformed, Eigen::VectorXd(init.array().log()),
             [](const Eigen::VectorXd& phi) { return Eigen::VectorXd(phi.array().exp()); });
  } else {
    run_nuts(target, init, [](const Eigen::VectorXd& x) { return x; });
  }
  return chain;
}

}  // namespace pmcmc
