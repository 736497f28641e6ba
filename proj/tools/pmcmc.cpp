// pmcmc: simulate / grid / fit / diagnose.
// Errors go to stderr as one JSON line {"error": ..., "kind": ...}.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pmcmc.hpp"

namespace {

enum Exit : int {
  kOk = 0,
  kUsage = 2,
  kConfig = 3,
  kData = 4,
  kNumeric = 5,
  kIo = 6,
  kOther = 1,
};

int fail(const std::string& kind, const std::string& message, int code) {
  const nlohmann::json line = {{"error", message}, {"kind", kind}};
  std::cerr << line.dump() << '\n';
  return code;
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> particles;
  std::optional<std::string> sampler;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file (defaults apply when omitted)");
  cmd->add_option("--seed", c.seed,
                  "simulate: simulation seed; grid/fit: run with this single seed");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--particles", c.particles, "particle count")->check(CLI::PositiveNumber);
  cmd->add_option("--sampler", c.sampler, "mh or nuts")->check(CLI::IsMember({"mh", "nuts"}));
}

pmcmc::ExperimentConfig resolve(const Common& c, bool seed_is_simulation) {
  pmcmc::ExperimentConfig cfg =
      c.config.empty() ? pmcmc::parse_config_text("{}") : pmcmc::load_config(c.config);
  if (c.seed) {
    if (seed_is_simulation) {
      cfg.simulation_seed = *c.seed;
    } else {
      cfg.seeds = {*c.seed};
    }
  }
  if (c.out) cfg.output_dir = *c.out;
  if (c.particles) cfg.particles = *c.particles;
  if (c.sampler) cfg.sampler.kind = *pmcmc::sampler_from_name(*c.sampler);
  cfg.validate();
  return cfg;
}

std::vector<std::string> default_chain_files(const std::string& dir) {
  std::vector<std::string> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("chain_", 0) == 0 && entry.path().extension() == ".csv") {
      out.push_back(entry.path().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle MCMC for stochastic SIR/SEIR models"};
  app.require_subcommand(1);

  Common simulate_opts, grid_opts, fit_opts, diagnose_opts;

  CLI::App* simulate = app.add_subcommand("simulate", "simulate a latent path and observations");
  add_common(simulate, simulate_opts);

  CLI::App* grid = app.add_subcommand("grid", "log-likelihood and gradient along one parameter");
  add_common(grid, grid_opts);
  std::string grid_param = "beta";
  double grid_lo = 0.248;
  double grid_hi = 0.260;
  std::size_t grid_count = 100;
  grid->add_option("--param", grid_param, "parameter to scan")
      ->check(CLI::IsMember({"beta", "gamma", "delta", "v"}));
  grid->add_option("--lo", grid_lo, "first grid value");
  grid->add_option("--hi", grid_hi, "last grid value");
  grid->add_option("--count", grid_count, "number of grid points");

  CLI::App* fit = app.add_subcommand("fit", "run one chain per seed");
  add_common(fit, fit_opts);
  std::optional<unsigned> threads;
  fit->add_option("--threads", threads, "chains run concurrently")->check(CLI::PositiveNumber);

  CLI::App* diagnose = app.add_subcommand("diagnose", "ACF, IACT/ESS summary and histograms");
  add_common(diagnose, diagnose_opts);
  std::vector<std::string> chain_files;
  std::optional<std::size_t> burn_in;
  bool no_truth = false;
  diagnose->add_option("chains", chain_files, "chain CSVs (default: chain_*.csv in --out)");
  diagnose->add_option("--burn-in", burn_in, "samples dropped from the start of each chain");
  diagnose->add_flag("--no-truth", no_truth, "skip MSE against the configured truth");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), kUsage);
  }

  try {
    if (simulate->parsed()) {
      const auto cfg = resolve(simulate_opts, true);
      const auto out = pmcmc::cmd_simulate(cfg);
      std::cout << "wrote " << out.trajectory << " and " << out.observations << " (" << out.rows
                << " observations)\n";
    } else if (grid->parsed()) {
      const auto cfg = resolve(grid_opts, false);
      const auto path = pmcmc::cmd_grid(cfg, *pmcmc::param_from_name(grid_param), grid_lo, grid_hi,
                                        grid_count);
      std::cout << "wrote " << path << '\n';
    } else if (fit->parsed()) {
      auto cfg = resolve(fit_opts, false);
      if (threads) cfg.threads = *threads;
      const auto out = pmcmc::cmd_fit(cfg);
      for (const auto& c : out.chains) std::cout << "wrote " << c << '\n';
      std::cout << "wrote " << out.summary << '\n' << "wrote " << out.mse << '\n';
    } else if (diagnose->parsed()) {
      auto cfg = resolve(diagnose_opts, false);
      if (burn_in) cfg.sampler.burn_in = *burn_in;
      if (chain_files.empty()) chain_files = default_chain_files(cfg.output_dir);
      const auto out = pmcmc::cmd_diagnose(cfg, chain_files, !no_truth);
      std::cout << "wrote " << out.files.size() << " files to " << cfg.output_dir << '\n';
    }
  } catch (const pmcmc::ConfigError& e) {
    return fail("config", e.what(), kConfig);
  } catch (const pmcmc::csv::FormatError& e) {
    return fail("data", e.what(), kData);
  } catch (const pmcmc::FilterError& e) {
    return fail("numeric", e.what(), kNumeric);
  } catch (const pmcmc::DegenerateWeights& e) {
    return fail("numeric", e.what(), kNumeric);
  } catch (const std::invalid_argument& e) {
    return fail("invalid_argument", e.what(), kConfig);
  } catch (const std::runtime_error& e) {
    return fail("io", e.what(), kIo);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), kOther);
  }
  return kOk;
}
