#pragma once

// Discrete-time stochastic SIR and SEIR updates and their parameter
// sensitivities.
//
// Noise enters through a reparameterization: for each rate x the draw is
// eps_x = noise_scale(x, P) * z_x with z_x ~ N(0, 1) supplied by the caller,
// so a step is a deterministic, differentiable map of (state, theta) once
// z is fixed.
//
// SIR:   s' = s - b i s^v + eps_b
//        i' = i + b i s^v - g i - eps_b + eps_g
//        r' = 1 - s' - i'
// SEIR:  s' = s - b i s + eps_b
//        e' = e + b i s - d e - eps_b + eps_d
//        i' = i + d e - g i + eps_g - eps_d
//        r' = 1 - s' - e' - i'        (= r + g i - eps_g)
//
// After the update s, e, i are clamped to [0, 1] and r absorbs the residual.
// If r itself would leave [0, 1], r is clamped and s absorbs instead.
// Sensitivity rows of clamped compartments are zeroed and the absorbing
// compartment's row is minus the sum of the others, so column sums stay 0.

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include <Eigen/Dense>

#include "pmcmc/parameters.hpp"

namespace pmcmc {

struct CompartmentState {
  double s = 1.0;
  double e = 0.0;
  double i = 0.0;
  double r = 0.0;

  double total() const { return s + e + i + r; }

  double operator[](std::size_t k) const {
    switch (k) {
      case 0: return s;
      case 1: return e;
      case 2: return i;
      default: return r;
    }
  }

  bool is_finite() const {
    return std::isfinite(s) && std::isfinite(e) && std::isfinite(i) &&
           std::isfinite(r);
  }

  friend bool operator==(const CompartmentState&, const CompartmentState&) = default;
};

inline constexpr std::size_t kCompartments = 4;

/// d(compartment) / d(inferred parameter); rows s, e, i, r.
using StateSensitivity =
    Eigen::Matrix<double, 4, Eigen::Dynamic, Eigen::ColMajor, 4, kParamCount>;

inline StateSensitivity zero_sensitivity(std::size_t inferred_count) {
  return StateSensitivity::Zero(4, static_cast<Eigen::Index>(inferred_count));
}

/// Largest |sum over compartments| of any sensitivity column.
inline double sensitivity_conservation_residual(const StateSensitivity& dx) {
  if (dx.cols() == 0) return 0.0;
  return dx.colwise().sum().cwiseAbs().maxCoeff();
}

/// Standard-normal draws feeding eps_beta, eps_gamma, eps_delta.
struct NoiseDraws {
  double beta = 0.0;
  double gamma = 0.0;
  double delta = 0.0;
};

/// Standard deviation of eps_x for rate x in a population of size P.
inline double noise_scale(double rate, int population) {
  return std::sqrt(rate) / static_cast<double>(population);
}

/// d noise_scale / d rate.
inline double noise_scale_slope(double rate, int population) {
  return 1.0 / (2.0 * static_cast<double>(population) * std::sqrt(rate));
}

enum ClampFlags : unsigned {
  kClampNone = 0,
  kClampS = 1u << 0,
  kClampE = 1u << 1,
  kClampI = 1u << 2,
  kClampR = 1u << 3,
};

struct StepOutcome {
  CompartmentState state;
  unsigned clamped = kClampNone;
};

namespace detail {

inline void check_step_inputs(const CompartmentState& x,
                              const ParameterVector& theta,
                              const NoiseDraws& z, int population) {
  if (!x.is_finite()) throw std::invalid_argument("non-finite compartment state");
  if (!std::isfinite(z.beta) || !std::isfinite(z.gamma) || !std::isfinite(z.delta)) {
    throw std::invalid_argument("non-finite noise draw");
  }
  if (population <= 0) throw std::invalid_argument("population must be positive");
  (void)theta;  // positivity is enforced by ParameterVector
}

inline double clamp_unit(double value, unsigned flag, unsigned& clamped) {
  if (value < 0.0) {
    clamped |= flag;
    return 0.0;
  }
  if (value > 1.0) {
    clamped |= flag;
    return 1.0;
  }
  return value;
}

/// One model step. When `dx` is non-null the sensitivity of the new state is
/// written to `dx_out` (which may alias `dx`).
inline StepOutcome advance(ModelKind kind, const CompartmentState& x,
                           const ParameterVector& theta, const NoiseDraws& z,
                           int population, const StateSensitivity* dx,
                           StateSensitivity* dx_out) {
  check_step_inputs(x, theta, z, population);
  if (dx != nullptr && dx->rows() != 4) {
    throw std::invalid_argument("sensitivity must have one row per compartment");
  }
  if (dx != nullptr &&
      static_cast<std::size_t>(dx->cols()) != theta.inferred_count()) {
    throw std::invalid_argument("sensitivity columns do not match inferred parameters");
  }

  const double beta = theta.beta();
  const double gamma = theta.gamma();
  const double delta = theta.delta();
  const double eps_b = noise_scale(beta, population) * z.beta;
  const double eps_g = noise_scale(gamma, population) * z.gamma;
  const double deps_b = noise_scale_slope(beta, population) * z.beta;
  const double deps_g = noise_scale_slope(gamma, population) * z.gamma;

  // Local Jacobians of (s', e', i') with respect to the state (s, e, i) and
  // all four parameters (beta, gamma, delta, v).
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  Eigen::Matrix<double, 3, 4> b = Eigen::Matrix<double, 3, 4>::Zero();

  double s_new = 0.0;
  double e_new = 0.0;
  double i_new = 0.0;

  if (kind == ModelKind::sir) {
    const double v = theta.v();
    const double sv = x.s > 0.0 ? std::pow(x.s, v) : 0.0;
    const double infection = beta * x.i * sv;
    s_new = x.s - infection + eps_b;
    i_new = x.i + infection - gamma * x.i - eps_b + eps_g;

    if (dx != nullptr) {
      const double dinf_ds = x.s > 0.0 ? beta * x.i * v * std::pow(x.s, v - 1.0) : 0.0;
      const double dinf_di = beta * sv;
      const double dinf_dbeta = x.i * sv;
      const double dinf_dv = x.s > 0.0 ? infection * std::log(x.s) : 0.0;

      a(0, 0) = 1.0 - dinf_ds;
      a(0, 2) = -dinf_di;
      a(2, 0) = dinf_ds;
      a(2, 2) = 1.0 + dinf_di - gamma;

      b(0, 0) = -dinf_dbeta + deps_b;
      b(0, 3) = -dinf_dv;
      b(2, 0) = dinf_dbeta - deps_b;
      b(2, 1) = -x.i + deps_g;
      b(2, 3) = dinf_dv;
    }
  } else {
    const double eps_d = noise_scale(delta, population) * z.delta;
    const double deps_d = noise_scale_slope(delta, population) * z.delta;
    const double infection = beta * x.i * x.s;
    s_new = x.s - infection + eps_b;
    e_new = x.e + infection - delta * x.e - eps_b + eps_d;
    i_new = x.i + delta * x.e - gamma * x.i + eps_g - eps_d;

    if (dx != nullptr) {
      a(0, 0) = 1.0 - beta * x.i;
      a(0, 2) = -beta * x.s;
      a(1, 0) = beta * x.i;
      a(1, 1) = 1.0 - delta;
      a(1, 2) = beta * x.s;
      a(2, 1) = delta;
      a(2, 2) = 1.0 - gamma;

      b(0, 0) = -x.i * x.s + deps_b;
      b(1, 0) = x.i * x.s - deps_b;
      b(1, 2) = -x.e + deps_d;
      b(2, 1) = -x.i + deps_g;
      b(2, 2) = x.e - deps_d;
    }
  }

  StepOutcome out;
  out.state.s = clamp_unit(s_new, kClampS, out.clamped);
  out.state.e = clamp_unit(e_new, kClampE, out.clamped);
  out.state.i = clamp_unit(i_new, kClampI, out.clamped);
  out.state.r = 1.0 - out.state.s - out.state.e - out.state.i;
  bool s_absorbs = false;
  if (out.state.r < 0.0 || out.state.r > 1.0) {
    out.clamped |= kClampR;
    out.state.r = out.state.r < 0.0 ? 0.0 : 1.0;
    out.state.s = 1.0 - out.state.e - out.state.i - out.state.r;
    s_absorbs = true;
  }

  if (dx != nullptr) {
    const Eigen::Index cols = dx->cols();
    StateSensitivity next = StateSensitivity::Zero(4, cols);
    // Only the first three rows of dx feed the dynamics.
    const Eigen::Matrix<double, 3, Eigen::Dynamic, Eigen::ColMajor, 3, kParamCount>
        dx_top = dx->topRows<3>();
    Eigen::Index col = 0;
    for (Param p : kAllParams) {
      if (!theta.inferred(p)) continue;
      next.block(0, col, 3, 1) =
          a * dx_top.col(col) + b.col(static_cast<Eigen::Index>(index_of(p)));
      ++col;
    }
    if (out.clamped & kClampS) next.row(0).setZero();
    if (out.clamped & kClampE) next.row(1).setZero();
    if (out.clamped & kClampI) next.row(2).setZero();
    if (kind == ModelKind::sir) next.row(1).setZero();
    if (s_absorbs) {
      next.row(3).setZero();
      next.row(0) = -(next.row(1) + next.row(2));
    } else {
      next.row(3) = -(next.row(0) + next.row(1) + next.row(2));
    }
    *dx_out = next;
  }
  return out;
}

}  // namespace detail

inline StepOutcome sir_step(const CompartmentState& x, const ParameterVector& theta,
                            const NoiseDraws& z, int population) {
  return detail::advance(ModelKind::sir, x, theta, z, population, nullptr, nullptr);
}

inline StepOutcome seir_step(const CompartmentState& x, const ParameterVector& theta,
                             const NoiseDraws& z, int population) {
  return detail::advance(ModelKind::seir, x, theta, z, population, nullptr, nullptr);
}

inline StepOutcome model_step(ModelKind kind, const CompartmentState& x,
                              const ParameterVector& theta, const NoiseDraws& z,
                              int population) {
  return detail::advance(kind, x, theta, z, population, nullptr, nullptr);
}

/// Sensitivity of the stepped state given the sensitivity of `x`; `z` must be
/// the draws used for the matching state step.
inline StateSensitivity step_sensitivity(const CompartmentState& x,
                                         const StateSensitivity& dx,
                                         const ParameterVector& theta,
                                         const NoiseDraws& z, int population,
                                         ModelKind kind) {
  StateSensitivity out;
  detail::advance(kind, x, theta, z, population, &dx, &out);
  return out;
}

/// State and sensitivity together, in place. Returns the clamp flags.
inline unsigned step_in_place(ModelKind kind, CompartmentState& x,
                              StateSensitivity& dx, const ParameterVector& theta,
                              const NoiseDraws& z, int population) {
  const StepOutcome out = detail::advance(kind, x, theta, z, population, &dx, &dx);
  x = out.state;
  return out.clamped;
}

}  // namespace pmcmc
