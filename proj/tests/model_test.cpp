#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pmcmc/compartments.hpp"
#include "pmcmc/epidemic_model.hpp"
#include "pmcmc/observation.hpp"
#include "pmcmc/parameters.hpp"

using namespace pmcmc;

namespace {

const ParameterVector kSir(0.254, 0.111, 0.4, 1.246, {true, true, false, false});
const ParameterVector kSeir(0.254, 0.111, 0.4, 1.246, {true, true, true, false});

StateSensitivity random_sensitivity(std::mt19937_64& g, std::size_t cols, ModelKind kind) {
  std::normal_distribution<double> n(0.0, 0.1);
  StateSensitivity dx = zero_sensitivity(cols);
  for (Eigen::Index c = 0; c < dx.cols(); ++c) {
    dx(0, c) = n(g);
    dx(1, c) = kind == ModelKind::seir ? n(g) : 0.0;
    dx(2, c) = n(g);
    dx(3, c) = -(dx(0, c) + dx(1, c) + dx(2, c));
  }
  return dx;
}

}  // namespace

TEST(Parameters, RejectsNonPositive) {
  EXPECT_THROW(ParameterVector(0.0, 0.1, 0.4, 1.0, {true, true, false, false}), std::invalid_argument);
  EXPECT_THROW(ParameterVector(0.1, -0.1, 0.4, 1.0, {true, true, false, false}), std::invalid_argument);
  EXPECT_THROW(ParameterVector(0.1, 0.1, NAN, 1.0, {true, true, false, false}), std::invalid_argument);
}

TEST(Parameters, InferredViews) {
  EXPECT_EQ(kSeir.inferred_count(), 3u);
  const Eigen::VectorXd v = kSeir.inferred_values();
  EXPECT_DOUBLE_EQ(v[2], 0.4);
  Eigen::VectorXd w(3);
  w << 0.3, 0.2, 0.5;
  const ParameterVector moved = kSeir.with_inferred(w);
  EXPECT_DOUBLE_EQ(moved.beta(), 0.3);
  EXPECT_DOUBLE_EQ(moved.delta(), 0.5);
  EXPECT_DOUBLE_EQ(moved.v(), 1.246);
}

TEST(Parameters, R0) {
  EXPECT_NEAR(r0(kSir), 0.254 / 0.111, 1e-15);
  EXPECT_THROW(r0(0.2, 0.0), std::domain_error);
}

TEST(SirStep, NoiselessMatchesHandFormula) {
  const CompartmentState x{0.9, 0.0, 0.08, 0.02};
  const StepOutcome out = sir_step(x, kSir, {}, 5000);
  const double inf = 0.254 * 0.08 * std::pow(0.9, 1.246);
  EXPECT_NEAR(out.state.s, 0.9 - inf, 1e-15);
  EXPECT_NEAR(out.state.i, 0.08 + inf - 0.111 * 0.08, 1e-15);
  EXPECT_NEAR(out.state.r, 0.02 + 0.111 * 0.08, 1e-15);
  EXPECT_EQ(out.state.e, 0.0);
  EXPECT_EQ(out.clamped, kClampNone);
}

TEST(SirStep, NoiseEntersWithRateScaledStd) {
  const CompartmentState x{0.9, 0.0, 0.08, 0.02};
  const StepOutcome a = sir_step(x, kSir, {}, 5000);
  const StepOutcome b = sir_step(x, kSir, {1.0, 0.0, 0.0}, 5000);
  EXPECT_NEAR(b.state.s - a.state.s, std::sqrt(0.254) / 5000, 1e-15);
  EXPECT_NEAR(b.state.i - a.state.i, -std::sqrt(0.254) / 5000, 1e-15);
  const StepOutcome c = sir_step(x, kSir, {0.0, 1.0, 0.0}, 5000);
  EXPECT_NEAR(c.state.i - a.state.i, std::sqrt(0.111) / 5000, 1e-15);
  EXPECT_NEAR(c.state.r - a.state.r, -std::sqrt(0.111) / 5000, 1e-15);
}

TEST(SeirStep, NoiselessMatchesHandFormula) {
  const CompartmentState x{0.9, 0.03, 0.05, 0.02};
  const StepOutcome out = seir_step(x, kSeir, {}, 5000);
  const double inf = 0.254 * 0.05 * 0.9;
  EXPECT_NEAR(out.state.s, 0.9 - inf, 1e-15);
  EXPECT_NEAR(out.state.e, 0.03 + inf - 0.4 * 0.03, 1e-15);
  EXPECT_NEAR(out.state.i, 0.05 + 0.4 * 0.03 - 0.111 * 0.05, 1e-15);
  EXPECT_NEAR(out.state.r, 0.02 + 0.111 * 0.05, 1e-15);
}

TEST(SeirStep, RecoveryNoiseConserves) {
  const CompartmentState x{0.9, 0.03, 0.05, 0.02};
  const StepOutcome out = seir_step(x, kSeir, {0.3, -1.2, 0.7}, 5000);
  EXPECT_NEAR(out.state.total(), 1.0, 1e-15);
  const StepOutcome base = seir_step(x, kSeir, {0.3, 0.0, 0.7}, 5000);
  EXPECT_NEAR(out.state.r - base.state.r, 1.2 * std::sqrt(0.111) / 5000, 1e-15);
}

TEST(Step, ClampsAndResidualAbsorbs) {
  const CompartmentState x{0.999, 0.0, 1e-6, 0.000999};
  const StepOutcome out = sir_step(x, kSir, {0.0, -50.0, 0.0}, 5000);
  EXPECT_TRUE(out.clamped & kClampI);
  EXPECT_EQ(out.state.i, 0.0);
  EXPECT_NEAR(out.state.total(), 1.0, 1e-15);
  EXPECT_GE(out.state.r, 0.0);
}

TEST(Step, RejectsNonFinite) {
  const CompartmentState bad{NAN, 0.0, 0.1, 0.0};
  EXPECT_THROW(sir_step(bad, kSir, {}, 5000), std::invalid_argument);
  EXPECT_THROW(sir_step({0.9, 0, 0.1, 0}, kSir, {INFINITY, 0, 0}, 5000), std::invalid_argument);
}

// One-step sensitivity against central differences of the step itself,
// with the incoming state perturbed along the incoming sensitivity.
class StepSensitivity : public ::testing::TestWithParam<ModelKind> {};

TEST_P(StepSensitivity, MatchesFiniteDifferences) {
  const ModelKind kind = GetParam();
  const ParameterVector theta = kind == ModelKind::sir
                                    ? ParameterVector(0.254, 0.111, 0.4, 1.246, {true, true, false, true})
                                    : kSeir;
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> u(0.05, 0.3);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 50; ++trial) {
    CompartmentState x{0, 0, u(g), u(g) * 0.5};
    x.e = kind == ModelKind::seir ? u(g) * 0.5 : 0.0;
    x.s = 1.0 - x.e - x.i - x.r;
    const NoiseDraws z{n(g), n(g), kind == ModelKind::seir ? n(g) : 0.0};
    const StateSensitivity dx = random_sensitivity(g, theta.inferred_count(), kind);
    const StateSensitivity got = step_sensitivity(x, dx, theta, z, 5000, kind);

    const auto params = theta.inferred_params();
    for (std::size_t c = 0; c < params.size(); ++c) {
      const double h = 1e-6;
      auto shifted = [&](double sign) {
        CompartmentState xs = x;
        xs.s += sign * h * dx(0, static_cast<Eigen::Index>(c));
        xs.e += sign * h * dx(1, static_cast<Eigen::Index>(c));
        xs.i += sign * h * dx(2, static_cast<Eigen::Index>(c));
        xs.r += sign * h * dx(3, static_cast<Eigen::Index>(c));
        const ParameterVector ts = theta.with(params[c], theta[params[c]] + sign * h);
        return model_step(kind, xs, ts, z, 5000).state;
      };
      const CompartmentState hi = shifted(1.0);
      const CompartmentState lo = shifted(-1.0);
      for (std::size_t row = 0; row < 4; ++row) {
        const double fd = (hi[row] - lo[row]) / (2 * h);
        EXPECT_NEAR(got(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(c)), fd, 1e-7)
            << "row " << row << " param " << param_name(params[c]);
      }
    }
    EXPECT_LT(sensitivity_conservation_residual(got), 1e-12);
  }
}

INSTANTIATE_TEST_SUITE_P(Models, StepSensitivity,
                         ::testing::Values(ModelKind::sir, ModelKind::seir));

TEST(Step, ClampedRowHasZeroSensitivity) {
  const CompartmentState x{0.999, 0.0, 1e-6, 0.000999};
  CompartmentState y = x;
  StateSensitivity dx = zero_sensitivity(2);
  dx(2, 0) = 1.0;
  dx(0, 0) = -1.0;
  const unsigned flags = step_in_place(ModelKind::sir, y, dx, kSir, {0.0, -50.0, 0.0}, 5000);
  EXPECT_TRUE(flags & kClampI);
  EXPECT_EQ(dx.row(2).norm(), 0.0);
  EXPECT_LT(sensitivity_conservation_residual(dx), 1e-15);
}

TEST(Observation, DensityMatchesLogNormalFormula) {
  const ObservationModelParams obs;
  const CompartmentState x{0.9, 0.0, 0.07, 0.03};
  const double y = 1.003;
  const double mu = 0.25 * std::pow(0.07, 1.07);
  const double expect = -std::log(0.0012 * std::sqrt(2 * M_PI)) -
                        0.5 * std::pow((std::log(y) - mu) / 0.0012, 2);
  EXPECT_NEAR(log_obs_density(y, x, obs), expect, 1e-9 * std::abs(expect));
  EXPECT_THROW(log_obs_density(0.0, x, obs), std::invalid_argument);
}

TEST(Observation, GradientThroughInfectedSensitivity) {
  const ObservationModelParams obs;
  const CompartmentState x{0.9, 0.0, 0.07, 0.03};
  StateSensitivity dx = zero_sensitivity(2);
  dx(2, 0) = 0.4;
  dx(2, 1) = -1.3;
  const double y = 1.01;
  const Eigen::VectorXd g = d_log_obs_density(y, x, dx, obs);
  const double h = 1e-7;
  for (int c = 0; c < 2; ++c) {
    CompartmentState hi = x, lo = x;
    hi.i += h * dx(2, c);
    lo.i -= h * dx(2, c);
    const double fd = (log_obs_density(y, hi, obs) - log_obs_density(y, lo, obs)) / (2 * h);
    EXPECT_NEAR(g[c], fd, 1e-5 * std::abs(fd));
  }
}

TEST(Observation, SeriesValidation) {
  EXPECT_THROW(ObservationSeries({{1, 1.0}, {1, 1.0}}), std::invalid_argument);
  EXPECT_THROW(ObservationSeries({{0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(ObservationSeries({{1, -1.0}}), std::invalid_argument);
  const ObservationSeries s({{1, 1.0}, {3, 1.1}, {4, 1.2}});
  EXPECT_EQ(s.prefix(2).size(), 2u);
}

TEST(Simulate, SirCurveRisesThenFalls) {
  const ObservationModelParams obs;
  const auto init = InitialStateSpec::fixed({4990.0 / 5000, 0, 10.0 / 5000, 0});
  const SimulatedEpidemic sim = simulate_epidemic(ModelKind::sir, kSir, obs, 125, init, 2024);
  ASSERT_EQ(sim.path.size(), 126u);
  ASSERT_EQ(sim.observations.size(), 125u);
  std::size_t peak = 0;
  for (std::size_t t = 0; t < sim.path.size(); ++t) {
    if (sim.path[t].i > sim.path[peak].i) peak = t;
    EXPECT_NEAR(sim.path[t].total(), 1.0, 1e-12);
  }
  EXPECT_GT(peak, 5u);
  EXPECT_LT(peak, 120u);
  EXPECT_LT(sim.path.back().i, 0.5 * sim.path[peak].i);
  for (const auto& o : sim.observations) EXPECT_GT(o.y, 0.0);
}

TEST(Simulate, DeterministicPerSeed) {
  const ObservationModelParams obs;
  const auto init = InitialStateSpec::uniform(0.00016, 0.00024);
  const auto a = simulate_epidemic(ModelKind::seir, kSeir, obs, 40, init, 11);
  const auto b = simulate_epidemic(ModelKind::seir, kSeir, obs, 40, init, 11);
  const auto c = simulate_epidemic(ModelKind::seir, kSeir, obs, 40, init, 12);
  for (std::size_t t = 0; t < 40; ++t) EXPECT_EQ(a.observations[t].y, b.observations[t].y);
  EXPECT_NE(a.observations[10].y, c.observations[10].y);
}

TEST(InitialState, UniformDrawsWithinRange) {
  const auto spec = InitialStateSpec::uniform(0.00016, 0.00024);
  const CrnLayout layout(4);
  for (std::size_t k = 0; k < 200; ++k) {
    const CompartmentState x = spec.sample(ModelKind::seir, layout, k);
    EXPECT_GE(x.e, 0.00016);
    EXPECT_LE(x.e, 0.00024);
    EXPECT_GE(x.i, 0.00016);
    EXPECT_LE(x.i, 0.00024);
    EXPECT_NEAR(x.total(), 1.0, 1e-15);
  }
  EXPECT_THROW(InitialStateSpec::fixed({0.5, 0, 0.1, 0}), std::invalid_argument);
}
