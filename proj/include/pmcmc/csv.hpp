#pragma once

// CSV readers and writers for the file formats the CLI exchanges:
//   observations  day,s,e,i,r,y          (e empty for SIR)
//   trajectory    day,s,e,i,r            (days 0..T)
//   chain         iter,beta,gamma,delta,loglik,accepted,cum_seconds
// Numbers are written in shortest round-trip form with '.' decimals.

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "pmcmc/epidemic_model.hpp"
#include "pmcmc/samplers.hpp"

namespace pmcmc::csv {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

inline double parse_number(std::string_view text, std::size_t line) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw FormatError("line " + std::to_string(line) + ": not a number: '" +
                      std::string(text) + "'");
  }
  return value;
}

inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
  return out;
}

/// Rows of a headed CSV as strings, addressed by column name.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (header[k] == name) return k;
    }
    return std::nullopt;
  }

  std::size_t require(std::string_view name) const {
    const auto c = column(name);
    if (!c) throw FormatError("missing column '" + std::string(name) + "'");
    return *c;
  }
};

inline Table read_table(std::istream& in) {
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty CSV");
  t.header = split(line);
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line == "\r") continue;
    auto row = split(line);
    if (row.size() != t.header.size()) {
      throw FormatError("line " + std::to_string(number) + ": expected " +
                        std::to_string(t.header.size()) + " fields, got " +
                        std::to_string(row.size()));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline Table read_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_table(in);
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

// ---------------------------------------------------------------------------

inline void write_observations(std::ostream& out, ModelKind kind,
                               const std::vector<CompartmentState>& path,
                               const ObservationSeries& obs) {
  out << "day,s,e,i,r,y\n";
  for (const Observation& o : obs) {
    const CompartmentState& x = path.at(static_cast<std::size_t>(o.day));
    out << o.day << ',' << format_number(x.s) << ','
        << (kind == ModelKind::sir ? std::string() : format_number(x.e)) << ','
        << format_number(x.i) << ',' << format_number(x.r) << ',' << format_number(o.y)
        << '\n';
  }
}

inline void write_trajectory(std::ostream& out, ModelKind kind,
                             const std::vector<CompartmentState>& path) {
  out << "day,s,e,i,r\n";
  for (std::size_t d = 0; d < path.size(); ++d) {
    const CompartmentState& x = path[d];
    out << d << ',' << format_number(x.s) << ','
        << (kind == ModelKind::sir ? std::string() : format_number(x.e)) << ','
        << format_number(x.i) << ',' << format_number(x.r) << '\n';
  }
}

/// Reads the `day` and `y` columns; other columns are ignored.
inline ObservationSeries read_observations(std::istream& in) {
  const Table t = read_table(in);
  const std::size_t day = t.require("day");
  const std::size_t y = t.require("y");
  std::vector<Observation> points;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const double d = parse_number(t.rows[k][day], k + 2);
    if (d != std::floor(d)) throw FormatError("line " + std::to_string(k + 2) + ": day must be an integer");
    points.push_back({static_cast<int>(d), parse_number(t.rows[k][y], k + 2)});
  }
  if (points.empty()) throw FormatError("observation file has no rows");
  return ObservationSeries(std::move(points));
}

inline ObservationSeries read_observations_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_observations(in);
}

// ---------------------------------------------------------------------------

inline constexpr std::array<std::string_view, 3> kChainParams{"beta", "gamma", "delta"};

/// Chain columns beta, gamma, delta are filled from matching chain names;
/// delta is left empty when absent.
inline void write_chain(std::ostream& out, const Chain& chain) {
  std::array<std::optional<Eigen::Index>, 3> cols;
  for (std::size_t p = 0; p < kChainParams.size(); ++p) {
    for (std::size_t c = 0; c < chain.names.size(); ++c) {
      if (chain.names[c] == kChainParams[p]) cols[p] = static_cast<Eigen::Index>(c);
    }
  }
  out << "iter,beta,gamma,delta,loglik,accepted,cum_seconds\n";
  for (std::size_t k = 0; k < chain.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    out << k;
    for (const auto& c : cols) {
      out << ',';
      if (c) out << format_number(chain.samples(row, *c));
    }
    out << ',' << format_number(chain.log_likelihood[k]) << ','
        << (chain.accepted[k] ? 1 : 0) << ',' << format_number(chain.cum_seconds[k]) << '\n';
  }
}

/// Columns with any empty cell are dropped; the rest become chain columns.
inline Chain read_chain(std::istream& in, std::size_t burn_in, SamplerKind kind = SamplerKind::mh) {
  const Table t = read_table(in);
  const std::size_t loglik = t.require("loglik");
  const std::size_t accepted = t.require("accepted");
  const std::size_t seconds = t.require("cum_seconds");
  std::vector<std::size_t> param_cols;
  Chain chain;
  chain.kind = kind;
  for (std::string_view name : kChainParams) {
    const auto c = t.column(name);
    if (!c) continue;
    bool present = !t.rows.empty();
    for (const auto& row : t.rows) present = present && !row[*c].empty();
    if (present) {
      param_cols.push_back(*c);
      chain.names.emplace_back(name);
    }
  }
  if (param_cols.empty()) throw FormatError("chain file has no parameter columns");
  chain.samples.resize(static_cast<Eigen::Index>(t.rows.size()),
                       static_cast<Eigen::Index>(param_cols.size()));
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto& row = t.rows[k];
    for (std::size_t c = 0; c < param_cols.size(); ++c) {
      chain.samples(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) =
          parse_number(row[param_cols[c]], k + 2);
    }
    chain.log_likelihood.push_back(parse_number(row[loglik], k + 2));
    const double acc = parse_number(row[accepted], k + 2);
    if (acc != 0.0 && acc != 1.0) throw FormatError("accepted must be 0 or 1");
    chain.accepted.push_back(acc == 1.0);
    chain.cum_seconds.push_back(parse_number(row[seconds], k + 2));
  }
  if (chain.size() <= burn_in) throw FormatError("chain shorter than burn-in");
  chain.burn_in = burn_in;
  return chain;
}

inline Chain read_chain_file(const std::string& path, std::size_t burn_in) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_chain(in, burn_in);
}

}  // namespace pmcmc::csv
