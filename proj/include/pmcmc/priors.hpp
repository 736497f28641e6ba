#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <boost/math/distributions/normal.hpp>

#include "pmcmc/parameters.hpp"

namespace pmcmc {

/// Prior on one positive rate. The truncated normal is renormalized on
/// (0, inf); its gradient on the support is the untruncated one.
class Prior {
 public:
  enum class Kind { half_normal, truncated_normal, uniform };

  static Prior half_normal(double scale) {
    if (!(scale > 0.0)) throw std::invalid_argument("half-normal scale must be > 0");
    return Prior(Kind::half_normal, scale, 0.0);
  }

  static Prior truncated_normal(double mean, double sd) {
    if (!(sd > 0.0) || !std::isfinite(mean)) {
      throw std::invalid_argument("normal prior needs finite mean and sd > 0");
    }
    return Prior(Kind::truncated_normal, mean, sd);
  }

  static Prior uniform(double lo, double hi) {
    if (!(lo >= 0.0) || !(hi > lo) || !std::isfinite(hi)) {
      throw std::invalid_argument("uniform prior needs 0 <= lo < hi");
    }
    return Prior(Kind::uniform, lo, hi);
  }

  Kind kind() const { return kind_; }
  double a() const { return a_; }
  double b() const { return b_; }

  bool in_support(double x) const {
    if (!std::isfinite(x)) return false;
    if (kind_ == Kind::uniform) return x >= a_ && x <= b_ && x > 0.0;
    return x > 0.0;
  }

  double log_density(double x) const {
    if (!in_support(x)) return -std::numeric_limits<double>::infinity();
    constexpr double kLogSqrt2Pi = 0.91893853320467274178;
    switch (kind_) {
      case Kind::half_normal:
        return std::numbers::ln2 - std::log(a_) - kLogSqrt2Pi - 0.5 * (x / a_) * (x / a_);
      case Kind::truncated_normal: {
        const double zx = (x - a_) / b_;
        const double mass = 0.5 * std::erfc(-a_ / (b_ * std::numbers::sqrt2));
        return -std::log(b_) - kLogSqrt2Pi - 0.5 * zx * zx - std::log(mass);
      }
      case Kind::uniform:
        return -std::log(b_ - a_);
    }
    return -std::numeric_limits<double>::infinity();
  }

  double d_log_density(double x) const {
    if (!in_support(x)) return 0.0;
    switch (kind_) {
      case Kind::half_normal: return -x / (a_ * a_);
      case Kind::truncated_normal: return -(x - a_) / (b_ * b_);
      case Kind::uniform: return 0.0;
    }
    return 0.0;
  }

  double median() const {
    switch (kind_) {
      case Kind::half_normal: {
        const boost::math::normal_distribution<double> unit;
        return a_ * boost::math::quantile(unit, 0.75);
      }
      case Kind::truncated_normal: {
        const boost::math::normal_distribution<double> dist(a_, b_);
        const double below = boost::math::cdf(dist, 0.0);
        return boost::math::quantile(dist, below + 0.5 * (1.0 - below));
      }
      case Kind::uniform:
        return 0.5 * (a_ + b_);
    }
    return 0.0;
  }

 private:
  Prior(Kind kind, double a, double b) : kind_(kind), a_(a), b_(b) {}

  Kind kind_;
  double a_;  // scale | mean | lo
  double b_;  // -     | sd   | hi
};

inline std::string_view prior_kind_name(Prior::Kind kind) {
  switch (kind) {
    case Prior::Kind::half_normal: return "halfnormal";
    case Prior::Kind::truncated_normal: return "normal";
    case Prior::Kind::uniform: return "uniform";
  }
  return "?";
}

/// One prior per parameter; only the inferred ones are consulted.
class PriorSpec {
 public:
  /// beta ~ HalfNormal(0.5); gamma, delta ~ Normal(4, 5) truncated to > 0;
  /// v ~ Uniform(0.5, 2).
  static PriorSpec defaults() {
    PriorSpec spec;
    spec.set(Param::beta, Prior::half_normal(0.5));
    spec.set(Param::gamma, Prior::truncated_normal(4.0, 5.0));
    spec.set(Param::delta, Prior::truncated_normal(4.0, 5.0));
    spec.set(Param::v, Prior::uniform(0.5, 2.0));
    return spec;
  }

  void set(Param p, const Prior& prior) { priors_[index_of(p)] = prior; }

  const Prior& get(Param p) const {
    const auto& slot = priors_[index_of(p)];
    if (!slot) throw std::invalid_argument("no prior for " + std::string(param_name(p)));
    return *slot;
  }

  bool has(Param p) const { return priors_[index_of(p)].has_value(); }

 private:
  std::array<std::optional<Prior>, kParamCount> priors_;
};

}  // namespace pmcmc
