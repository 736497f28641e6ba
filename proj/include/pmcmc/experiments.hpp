#pragma once

// The four CLI commands as library functions. Each writes its outputs under
// the configured output directory, overwriting earlier runs, and echoes the
// effective configuration to effective_config.json there.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pmcmc/config.hpp"
#include "pmcmc/csv.hpp"
#include "pmcmc/diagnostics.hpp"
#include "pmcmc/posterior.hpp"
#include "pmcmc/samplers.hpp"

namespace pmcmc {

namespace detail {

inline std::filesystem::path prepare_output(const ExperimentConfig& cfg) {
  const std::filesystem::path dir(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + cfg.output_dir);
  auto out = csv::open_output((dir / "effective_config.json").string());
  out << to_json(cfg).dump(2) << '\n';
  return dir;
}

inline FilterPosterior make_posterior(const ExperimentConfig& cfg, const ParameterVector& base,
                                      const ObservationSeries& observations, std::uint64_t seed) {
  FilterConfig filter;
  filter.particles = cfg.particles;
  filter.resample_threshold = cfg.threshold();
  filter.seed = filter_seed_for(seed);
  return FilterPosterior(cfg.model, base, cfg.observation, cfg.initial, observations,
                         cfg.priors, filter);
}

}  // namespace detail

struct SimulateOutputs {
  std::string trajectory;
  std::string observations;
  std::size_t rows = 0;
};

inline SimulateOutputs cmd_simulate(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto dir = detail::prepare_output(cfg);
  const SimulatedEpidemic sim = simulate_epidemic(cfg.model, cfg.truth, cfg.observation, cfg.days,
                                                  cfg.initial, cfg.simulation_seed);
  SimulateOutputs out;
  out.trajectory = (dir / "trajectory.csv").string();
  out.observations = (dir / "observations.csv").string();
  {
    auto f = csv::open_output(out.trajectory);
    csv::write_trajectory(f, cfg.model, sim.path);
  }
  {
    auto f = csv::open_output(out.observations);
    csv::write_observations(f, cfg.model, sim.path, sim.observations);
  }
  out.rows = sim.observations.size();
  return out;
}

struct GridRow {
  double value = 0.0;
  double loglik = 0.0;
  double grad = 0.0;
};

/// log-likelihood and its derivative along one parameter, every other
/// parameter at its configured true value, one frozen filter seed
/// (the first configured seed).
inline std::vector<GridRow> likelihood_grid(const ExperimentConfig& cfg,
                                            const ObservationSeries& observations, Param param,
                                            double lo, double hi, std::size_t count) {
  if (!(lo < hi)) throw ConfigError("grid needs lo < hi");
  if (count < 2) throw ConfigError("grid needs at least two points");
  if (!(lo > 0.0)) throw ConfigError("grid values must be positive");
  if ((cfg.model == ModelKind::sir && param == Param::delta) ||
      (cfg.model == ModelKind::seir && param == Param::v)) {
    throw ConfigError("parameter " + std::string(param_name(param)) + " is not used by this model");
  }
  std::array<bool, kParamCount> mask{};
  mask[index_of(param)] = true;
  const ParameterVector base(cfg.truth.beta(), cfg.truth.gamma(), cfg.truth.delta(), cfg.truth.v(), mask);
  FilterConfig filter;
  filter.particles = cfg.particles;
  filter.resample_threshold = cfg.threshold();
  filter.seed = filter_seed_for(cfg.seeds.front());

  std::vector<GridRow> rows;
  rows.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double value = k + 1 == count
                             ? hi
                             : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
    const CompartmentalModel model(cfg.model, base.with(param, value), cfg.observation, cfg.initial);
    const FilterResult fr = run_filter(model, observations, filter);
    rows.push_back({value, fr.log_likelihood, fr.gradient[0]});
  }
  return rows;
}

inline std::string cmd_grid(const ExperimentConfig& cfg, Param param, double lo, double hi,
                            std::size_t count) {
  cfg.validate();
  const ObservationSeries observations = csv::read_observations_file(cfg.observations_path());
  const std::vector<GridRow> rows = likelihood_grid(cfg, observations, param, lo, hi, count);
  const auto dir = detail::prepare_output(cfg);
  const std::string path = (dir / ("grid_" + std::string(param_name(param)) + ".csv")).string();
  auto f = csv::open_output(path);
  f << "value,loglik,grad\n";
  for (const GridRow& r : rows) {
    f << csv::format_number(r.value) << ',' << csv::format_number(r.loglik) << ','
      << csv::format_number(r.grad) << '\n';
  }
  return path;
}

/// One chain for one user-facing seed.
inline Chain run_experiment_chain(const ExperimentConfig& cfg, const ObservationSeries& observations,
                                  std::uint64_t seed) {
  const ParameterVector base = cfg.base_parameters();
  const FilterPosterior posterior = detail::make_posterior(cfg, base, observations, seed);
  ChainSettings settings;
  settings.kind = cfg.sampler.kind;
  settings.iterations = cfg.sampler.iterations;
  settings.burn_in = cfg.sampler.burn_in;
  if (cfg.sampler.kind == SamplerKind::mh) settings.mh_step_sizes = cfg.step_sizes();
  settings.nuts = cfg.sampler.nuts;
  settings.nuts_space = NutsSpace::log;
  settings.seed = sampler_seed_for(seed);
  settings.record_time = cfg.record_time;
  settings.names = cfg.inferred_names();
  return run_chain(posterior, cfg.initial_point(), settings);
}

inline std::string chain_stem(const ExperimentConfig& cfg, std::uint64_t seed) {
  return "chain_" + std::string(sampler_name(cfg.sampler.kind)) + "_N" +
         std::to_string(cfg.particles) + "_seed" + std::to_string(seed);
}

struct FitOutputs {
  std::vector<std::string> chains;
  std::string summary;
  std::string mse;
  std::vector<ChainSummary> summaries;  // one per seed, in seed order
};

namespace detail {

inline void write_summary_rows(std::ostream& out, const std::string& label, const ChainSummary& s) {
  for (const ParameterSummary& p : s.parameters) {
    out << label << ',' << p.name << ',' << csv::format_number(p.mean) << ','
        << csv::format_number(p.sd) << ',' << csv::format_number(p.q025) << ','
        << csv::format_number(p.q50) << ',' << csv::format_number(p.q975) << ','
        << csv::format_number(p.iact) << ',' << csv::format_number(p.ess) << ','
        << csv::format_number(p.ess_per_second) << ',' << csv::format_number(s.acceptance_rate)
        << ',' << (p.mse ? csv::format_number(*p.mse) : std::string()) << ','
        << s.samples << ',' << csv::format_number(s.elapsed_seconds) << '\n';
  }
}

inline constexpr const char* kSummaryHeader =
    "chain,param,mean,sd,q025,q50,q975,iact,ess,ess_per_second,acceptance_rate,mse,samples,"
    "elapsed_seconds\n";

inline std::vector<double> truth_for(const ExperimentConfig& cfg) {
  std::vector<double> t;
  for (Param p : cfg.base_parameters().inferred_params()) t.push_back(cfg.truth[p]);
  return t;
}

}  // namespace detail

/// One chain per configured seed. Chains are independent; with threads > 1
/// they run concurrently and write to distinct files.
inline FitOutputs cmd_fit(const ExperimentConfig& cfg) {
  cfg.validate();
  const ObservationSeries observations = csv::read_observations_file(cfg.observations_path());
  const auto dir = detail::prepare_output(cfg);

  const std::size_t n = cfg.seeds.size();
  std::vector<std::optional<Chain>> chains(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        chains[k] = run_experiment_chain(cfg, observations, cfg.seeds[k]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const unsigned workers = std::min<unsigned>(cfg.threads, static_cast<unsigned>(n));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  FitOutputs out;
  const std::vector<double> truth = detail::truth_for(cfg);
  const std::string tag = std::string(sampler_name(cfg.sampler.kind)) + "_N" + std::to_string(cfg.particles);
  out.summary = (dir / ("summary_" + tag + ".csv")).string();
  out.mse = (dir / ("mse_" + tag + ".csv")).string();
  auto summary_file = csv::open_output(out.summary);
  summary_file << detail::kSummaryHeader;
  auto mse_file = csv::open_output(out.mse);
  mse_file << "seed";
  for (const auto& name : cfg.inferred_names()) mse_file << ",mse_" << name;
  mse_file << ",seconds\n";

  std::vector<double> mean_mse(truth.size(), 0.0);
  double mean_seconds = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const Chain& chain = *chains[k];
    const std::string path = (dir / (chain_stem(cfg, cfg.seeds[k]) + ".csv")).string();
    {
      auto f = csv::open_output(path);
      csv::write_chain(f, chain);
    }
    out.chains.push_back(path);
    const ChainSummary s = summarize(chain, truth);
    detail::write_summary_rows(summary_file, std::to_string(cfg.seeds[k]), s);
    mse_file << cfg.seeds[k];
    for (std::size_t c = 0; c < truth.size(); ++c) {
      mse_file << ',' << csv::format_number(*s.parameters[c].mse);
      mean_mse[c] += *s.parameters[c].mse / static_cast<double>(n);
    }
    mse_file << ',' << csv::format_number(s.elapsed_seconds) << '\n';
    mean_seconds += s.elapsed_seconds / static_cast<double>(n);
    out.summaries.push_back(s);
  }
  mse_file << "mean";
  for (double m : mean_mse) mse_file << ',' << csv::format_number(m);
  mse_file << ',' << csv::format_number(mean_seconds) << '\n';
  return out;
}

struct DiagnoseOutputs {
  std::vector<std::string> files;
};

/// ACF (lags 0..max_lag), summary and histograms (each parameter plus R0
/// when beta and gamma are present) for each chain file.
inline DiagnoseOutputs cmd_diagnose(const ExperimentConfig& cfg,
                                    const std::vector<std::string>& chain_files,
                                    bool with_truth = true, std::size_t max_lag = 100,
                                    std::size_t bins = 30) {
  cfg.validate();
  if (chain_files.empty()) throw ConfigError("diagnose needs at least one chain file");
  const auto dir = detail::prepare_output(cfg);
  DiagnoseOutputs out;
  for (const std::string& file : chain_files) {
    const Chain chain = csv::read_chain_file(file, cfg.sampler.burn_in);
    const std::string stem = std::filesystem::path(file).stem().string();

    std::optional<std::vector<double>> truth;
    if (with_truth) {
      std::vector<double> t;
      for (const std::string& name : chain.names) t.push_back(cfg.truth[*param_from_name(name)]);
      truth = t;
    }
    const ChainSummary s = summarize(chain, truth);
    const std::string summary_path = (dir / (stem + "_summary.csv")).string();
    {
      auto f = csv::open_output(summary_path);
      f << detail::kSummaryHeader;
      detail::write_summary_rows(f, stem, s);
    }
    out.files.push_back(summary_path);

    const std::size_t post = chain.size() - chain.burn_in;
    const std::size_t lags = std::min(max_lag, post - 1);
    std::vector<std::vector<double>> acfs;
    for (Eigen::Index c = 0; c < chain.samples.cols(); ++c) {
      const std::vector<double> xs = post_burn_in(chain, c);
      try {
        acfs.push_back(acf(xs, lags));
      } catch (const std::domain_error&) {
        acfs.emplace_back(lags + 1, std::numeric_limits<double>::quiet_NaN());
      }
    }
    const std::string acf_path = (dir / (stem + "_acf.csv")).string();
    {
      auto f = csv::open_output(acf_path);
      f << "lag";
      for (const auto& name : chain.names) f << ',' << name;
      f << '\n';
      for (std::size_t k = 0; k <= lags; ++k) {
        f << k;
        for (const auto& a : acfs) f << ',' << csv::format_number(a[k]);
        f << '\n';
      }
    }
    out.files.push_back(acf_path);

    auto write_hist = [&](const std::string& name, const std::vector<double>& xs) {
      const Histogram h = histogram(xs, bins);
      const std::string path = (dir / (stem + "_hist_" + name + ".csv")).string();
      auto f = csv::open_output(path);
      f << "bin_lo,bin_hi,count\n";
      for (std::size_t b = 0; b < h.counts.size(); ++b) {
        f << csv::format_number(h.edges[b]) << ',' << csv::format_number(h.edges[b + 1]) << ','
          << h.counts[b] << '\n';
      }
      out.files.push_back(path);
    };
    for (Eigen::Index c = 0; c < chain.samples.cols(); ++c) {
      write_hist(chain.names[static_cast<std::size_t>(c)], post_burn_in(chain, c));
    }
    const bool has_r0 = std::find(chain.names.begin(), chain.names.end(), "beta") != chain.names.end() &&
                        std::find(chain.names.begin(), chain.names.end(), "gamma") != chain.names.end();
    if (has_r0) write_hist("r0", r0_series(chain));
  }
  return out;
}

}  // namespace pmcmc
