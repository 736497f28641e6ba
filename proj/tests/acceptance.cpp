// Acceptance checks, one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all)
// Exit status is nonzero if any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pmcmc.hpp"

using namespace pmcmc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 1. frozen-CRN filter gradient vs central differences
Outcome gradient_oracle() {
  ExperimentConfig cfg;
  const auto sim = simulate_epidemic(cfg.model, cfg.truth, cfg.observation, 50, cfg.initial,
                                     cfg.simulation_seed);
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> ub(0.2, 0.3), ug(0.08, 0.14);
  const auto fc = FilterConfig::with_default_threshold(100, 11);
  auto run = [&](const ParameterVector& p) {
    return run_filter(CompartmentalModel(cfg.model, p, cfg.observation, cfg.initial),
                      sim.observations, fc);
  };
  int ok = 0, counted = 0, excluded = 0;
  for (int k = 0; k < 50; ++k) {
    const ParameterVector th(ub(g), ug(g), 0.4, 1.246, {true, true, false, false});
    const auto r = run(th);
    bool good = true, moved = false;
    for (int c = 0; c < 2; ++c) {
      const Param p = c ? Param::gamma : Param::beta;
      const double h = 1e-6 * th[p];
      const auto hi = run(th.with(p, th[p] + h));
      const auto lo = run(th.with(p, th[p] - h));
      if (hi.ancestry_fingerprint != r.ancestry_fingerprint ||
          lo.ancestry_fingerprint != r.ancestry_fingerprint) {
        moved = true;
        break;
      }
      const double fd = (hi.log_likelihood - lo.log_likelihood) / (2 * h);
      if (std::abs(fd - r.gradient[c]) > 1e-4 * std::abs(fd)) good = false;
    }
    if (moved) {
      ++excluded;
      continue;
    }
    ++counted;
    ok += good;
  }
  const bool pass = counted > 0 && ok >= 0.95 * counted;
  return {pass, fmt("%d/%d points within 1e-4 (%d excluded, ancestry changed)", ok, counted,
                    excluded)};
}

// 2. beta likelihood grid: argmax and single dominant +/- gradient sign change
Outcome beta_grid() {
  ExperimentConfig cfg;
  cfg.particles = 500;
  const auto sim = simulate_epidemic(cfg.model, cfg.truth, cfg.observation, cfg.days, cfg.initial,
                                     cfg.simulation_seed);
  int good = 0;
  std::string worst;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    cfg.seeds = {s};
    const auto rows = likelihood_grid(cfg, sim.observations, Param::beta, 0.248, 0.260, 100);
    const auto top = std::max_element(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      return a.loglik < b.loglik;
    });
    // best split: positive gradient to the left, negative to the right
    std::size_t best = 0, cut = 0;
    for (std::size_t c = 1; c < rows.size(); ++c) {
      std::size_t agree = 0;
      for (std::size_t k = 0; k < rows.size(); ++k) agree += (k < c) == (rows[k].grad > 0);
      if (agree > best) {
        best = agree;
        cut = c;
      }
    }
    const double where = 0.5 * (rows[cut - 1].value + rows[cut].value);
    const double agreement = static_cast<double>(best) / static_cast<double>(rows.size());
    const bool ok = std::abs(top->value - 0.254) <= 0.003 && std::abs(where - 0.254) <= 0.003 &&
                    agreement >= 0.9;
    good += ok;
    if (!ok) worst += fmt(" seed%llu(argmax %.4f, change %.4f, agree %.2f)",
                          static_cast<unsigned long long>(s), top->value, where, agreement);
  }
  return {good >= 8, fmt("%d/10 seeds", good) + worst};
}

// 3. compartment sums and sensitivity column sums over random noisy steps
Outcome conservation() {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n;
  double worst_sum = 0.0, worst_sens = 0.0;
  long steps = 0, unclamped = 0;
  for (ModelKind kind : {ModelKind::sir, ModelKind::seir}) {
    const bool seir = kind == ModelKind::seir;
    for (int traj = 0; traj < 1000; ++traj) {
      const ParameterVector th(0.1 + 0.9 * u(g), 0.05 + 0.45 * u(g), 0.1 + 0.9 * u(g), 1.246,
                               {true, true, seir, false});
      CompartmentState x;
      // some starts sit near the boundary so clamping is exercised
      const double scale = traj % 4 == 0 ? 1e-4 : 0.3;
      x.i = scale * u(g);
      x.e = seir ? scale * u(g) : 0.0;
      x.r = 0.3 * u(g);
      x.s = 1.0 - x.e - x.i - x.r;
      StateSensitivity dx = zero_sensitivity(th.inferred_count());
      for (Eigen::Index c = 0; c < dx.cols(); ++c) {
        dx(0, c) = 0.1 * n(g);
        dx(1, c) = seir ? 0.1 * n(g) : 0.0;
        dx(2, c) = 0.1 * n(g);
        dx(3, c) = -(dx(0, c) + dx(1, c) + dx(2, c));
      }
      const int population = traj % 2 ? 5000 : 50;
      for (int t = 0; t < 50; ++t) {
        const NoiseDraws z{n(g), n(g), seir ? n(g) : 0.0};
        const unsigned flags = step_in_place(kind, x, dx, th, z, population);
        ++steps;
        worst_sum = std::max(worst_sum, std::abs(x.total() - 1.0));
        if (flags == kClampNone) {
          ++unclamped;
          worst_sens = std::max(worst_sens, sensitivity_conservation_residual(dx));
        }
      }
    }
  }
  const bool pass = steps >= 100000 && worst_sum <= 1e-12 && worst_sens <= 1e-10;
  return {pass, fmt("%ld steps, max |sum-1| %.2e, max sensitivity column sum %.2e (%ld unclamped)",
                    steps, worst_sum, worst_sens, unclamped)};
}

// 4. Gaussian log-density derivatives vs finite differences
double direct_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::MatrixXd& c) {
  const Eigen::VectorXd d = x - mu;
  return -0.5 * (d.transpose() * c.inverse() * d)(0) - 0.5 * std::log(c.determinant()) -
         0.5 * static_cast<double>(x.size()) * std::log(2 * M_PI);
}

Outcome gaussian_derivatives() {
  std::mt19937_64 g(4);
  std::normal_distribution<double> n;
  double worst = 0.0;
  bool negated = true;
  int cases = 0;
  for (int dim : {1, 3}) {
    for (int trial = 0; trial < 100; ++trial, ++cases) {
      Eigen::VectorXd x(dim), mu(dim);
      for (int k = 0; k < dim; ++k) {
        x[k] = n(g);
        mu[k] = n(g);
      }
      Eigen::MatrixXd a(dim, dim);
      for (int k = 0; k < dim * dim; ++k) a(k / dim, k % dim) = n(g);
      const Eigen::MatrixXd c = a * a.transpose() + Eigen::MatrixXd::Identity(dim, dim);
      const auto d = gaussian_logpdf_derivs(x, mu, c);
      const double h = 1e-6;
      for (int k = 0; k < dim; ++k) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
        e[k] = h;
        const double fx = (direct_logpdf(x + e, mu, c) - direct_logpdf(x - e, mu, c)) / (2 * h);
        const double fm = (direct_logpdf(x, mu + e, c) - direct_logpdf(x, mu - e, c)) / (2 * h);
        worst = std::max({worst, std::abs(fx - d.d_x[k]), std::abs(fm - d.d_mean[k])});
        negated = negated && d.d_x[k] == -d.d_mean[k];
      }
      // entries of C perturbed one at a time, matching the unsymmetrized convention
      for (int r = 0; r < dim; ++r) {
        for (int s = 0; s < dim; ++s) {
          Eigen::MatrixXd e = Eigen::MatrixXd::Zero(dim, dim);
          e(r, s) = h;
          const double fc = (direct_logpdf(x, mu, c + e) - direct_logpdf(x, mu, c - e)) / (2 * h);
          worst = std::max(worst, std::abs(fc - d.d_cov(r, s)));
        }
      }
    }
  }
  return {worst <= 1e-6 && negated,
          fmt("%d inputs, max |analytic - fd| %.2e, d/dx == -d/dmu %s", cases, worst,
              negated ? "exactly" : "NOT exactly")};
}

// 5. samplers on analytic Gaussians
struct Gaussian {
  Eigen::VectorXd mu;
  Eigen::MatrixXd prec;
  Evaluation operator()(const Eigen::VectorXd& x) const {
    Evaluation e;
    const Eigen::VectorXd d = x - mu;
    e.log_density = -0.5 * d.dot(prec * d);
    e.gradient = -(prec * d);
    e.log_likelihood = e.log_density;
    return e;
  }
};

Outcome sampler_validity() {
  struct Case {
    std::string name;
    Eigen::VectorXd mu;
    Eigen::MatrixXd cov;
  };
  std::vector<Case> cases;
  {
    Eigen::VectorXd mu(1);
    mu << 1.5;
    Eigen::MatrixXd c(1, 1);
    c << 4.0;
    cases.push_back({"1d", mu, c});
  }
  {
    Eigen::VectorXd mu(2);
    mu << -1.0, 3.0;
    Eigen::MatrixXd c(2, 2);
    c << 1.0, 0.6, 0.6, 2.25;
    cases.push_back({"2d", mu, c});
  }
  bool pass = true;
  std::string detail;
  const std::size_t burn = 1000, keep = 10000;
  for (SamplerKind kind : {SamplerKind::mh, SamplerKind::nuts}) {
    for (const auto& cs : cases) {
      const Gaussian target{cs.mu, cs.cov.inverse()};
      const Eigen::Index d = cs.mu.size();
      ChainSettings st;
      st.kind = kind;
      st.iterations = burn + keep;
      st.burn_in = burn;
      st.mh_step_sizes = 2.4 / std::sqrt(static_cast<double>(d)) * cs.cov.diagonal().cwiseSqrt();
      st.nuts.step_size = 0.4;
      st.nuts_space = NutsSpace::identity;
      st.seed = 17;
      st.record_time = false;
      for (Eigen::Index k = 0; k < d; ++k) st.names.push_back("x" + std::to_string(k));
      const Chain chain = run_chain(target, Eigen::VectorXd::Zero(d), st);
      for (Eigen::Index k = 0; k < d; ++k) {
        const auto xs = post_burn_in(chain, k);
        double m = 0.0;
        for (double v : xs) m += v;
        m /= static_cast<double>(xs.size());
        double var = 0.0;
        for (double v : xs) var += (v - m) * (v - m);
        var /= static_cast<double>(xs.size() - 1);
        const double se = std::sqrt(cs.cov(k, k) * iact(xs) / static_cast<double>(xs.size()));
        const double zm = (m - cs.mu[k]) / se;
        const double rv = var / cs.cov(k, k) - 1.0;
        const bool ok = std::abs(zm) <= 3.0 && std::abs(rv) <= 0.1;
        pass = pass && ok;
        detail += fmt(" %s/%s/x%d(z %.2f, var %+.1f%%)", std::string(sampler_name(kind)).c_str(),
                      cs.name.c_str(), static_cast<int>(k), zm, 100 * rv);
      }
    }
  }
  return {pass, "mean z-scores and variance errors:" + detail};
}

// 6. SIR, small chains: NUTS beta MSE vs MH beta MSE
Outcome sir_mse_ordering() {
  ExperimentConfig cfg;
  cfg.particles = 50;
  cfg.sampler.iterations = 50;
  cfg.sampler.burn_in = 0;
  cfg.record_time = false;
  const auto sim = simulate_epidemic(cfg.model, cfg.truth, cfg.observation, cfg.days, cfg.initial,
                                     cfg.simulation_seed);
  const std::vector<double> truth{cfg.truth[Param::beta], cfg.truth[Param::gamma]};
  std::map<SamplerKind, std::vector<double>> by;
  for (SamplerKind kind : {SamplerKind::mh, SamplerKind::nuts}) {
    cfg.sampler.kind = kind;
    for (std::uint64_t s = 1; s <= 10; ++s) {
      const Chain ch = run_experiment_chain(cfg, sim.observations, s);
      by[kind].push_back(*summarize(ch, truth).parameters[0].mse);
    }
  }
  int wins = 0;
  for (std::size_t k = 0; k < 10; ++k) wins += by[SamplerKind::nuts][k] < by[SamplerKind::mh][k];
  const double mh = median(by[SamplerKind::mh]), nuts = median(by[SamplerKind::nuts]);
  return {nuts < mh && wins >= 7,
          fmt("median beta MSE nuts %.5f vs mh %.5f, nuts lower on %d/10 seeds (step %.4f)", nuts, mh,
              wins, cfg.sampler.nuts.step_size)};
}

// 7. SEIR/NUTS: more particles should raise acceptance and lower beta IACT
Outcome seir_particle_trend() {
  ExperimentConfig cfg = parse_config_text(R"({"model": "seir"})");
  cfg.record_time = false;
  const auto sim = simulate_epidemic(cfg.model, cfg.truth, cfg.observation, cfg.days, cfg.initial,
                                     cfg.simulation_seed);
  double acc[2], tau[2];
  double secs[2];
  const std::size_t ns[2] = {16, 256};
  for (int k = 0; k < 2; ++k) {
    cfg.particles = ns[k];
    const auto t0 = std::chrono::steady_clock::now();
    const Chain ch = run_experiment_chain(cfg, sim.observations, 1);
    secs[k] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto sm = summarize(ch);
    acc[k] = sm.acceptance_rate;
    tau[k] = sm.parameters[0].iact;
  }
  const bool pass = acc[1] - acc[0] >= 0.1 && tau[1] < tau[0];
  return {pass, fmt("T=%zu M=%zu step %.4f: acceptance N=16 %.3f, N=256 %.3f; beta IACT N=16 %.2f, "
                    "N=256 %.2f (%.0f s, %.0f s)",
                    cfg.days, cfg.sampler.iterations, cfg.sampler.nuts.step_size, acc[0], acc[1],
                    tau[0], tau[1], secs[0], secs[1])};
}

// 8. IACT/ESS against AR(1) and white noise
Outcome diagnostics_oracle() {
  std::mt19937_64 g(8);
  std::normal_distribution<double> n;
  const std::size_t m = 100000;
  const double rho = 0.5;
  std::vector<double> ar(m), white(m);
  ar[0] = n(g) / std::sqrt(1 - rho * rho);
  for (std::size_t k = 1; k < m; ++k) ar[k] = rho * ar[k - 1] + n(g);
  for (double& v : white) v = n(g);
  const double tau = iact(ar);
  const double expect = (1 + rho) / (1 - rho);
  const double e = ess(white, 1.0).ess;
  const bool pass = std::abs(tau / expect - 1) <= 0.15 && std::abs(e / m - 1) <= 0.1;
  return {pass, fmt("AR(1) IACT %.3f vs %.3f, white-noise ESS %.0f of %zu", tau, expect, e, m)};
}

// 9. two identical fits produce identical chain files
std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "pmcmc_acceptance_det";
  fs::remove_all(root);
  ExperimentConfig cfg;
  cfg.particles = 30;
  cfg.sampler.iterations = 40;
  cfg.sampler.burn_in = 10;
  cfg.seeds = {1, 2};
  cfg.record_time = false;
  std::vector<std::string> files[2];
  std::size_t compared = 0, same = 0;
  for (SamplerKind kind : {SamplerKind::mh, SamplerKind::nuts}) {
    cfg.sampler.kind = kind;
    for (int run = 0; run < 2; ++run) {
      cfg.output_dir = (root / ("run" + std::to_string(run))).string();
      cmd_simulate(cfg);
      files[run] = cmd_fit(cfg).chains;
    }
    for (std::size_t k = 0; k < files[0].size(); ++k) {
      ++compared;
      const std::string a = slurp(files[0][k]), b = slurp(files[1][k]);
      same += !a.empty() && a == b;
    }
  }
  fs::remove_all(root);
  return {compared > 0 && same == compared, fmt("%zu/%zu chain files byte-identical", same, compared)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
      {"filter gradient vs finite differences", gradient_oracle},
      {"beta likelihood grid argmax and gradient sign", beta_grid},
      {"compartment and sensitivity conservation", conservation},
      {"Gaussian log-density derivatives", gaussian_derivatives},
      {"MH and NUTS on Gaussian targets", sampler_validity},
      {"SIR beta MSE, NUTS below MH", sir_mse_ordering},
      {"SEIR acceptance and IACT improve with particles", seir_particle_trend},
      {"IACT and ESS oracles", diagnostics_oracle},
      {"fit determinism", determinism},
  };
  std::set<int> wanted;
  for (int k = 1; k < argc; ++k) wanted.insert(std::atoi(argv[k]));
  int failed = 0;
  for (std::size_t k = 0; k < checks.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = checks[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%d] %s  %s: %s  (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", checks[k].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
