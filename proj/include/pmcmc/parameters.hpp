#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace pmcmc {

enum class ModelKind { sir, seir };

inline std::string_view model_name(ModelKind kind) {
  return kind == ModelKind::sir ? "sir" : "seir";
}

inline std::optional<ModelKind> model_from_name(std::string_view name) {
  if (name == "sir") return ModelKind::sir;
  if (name == "seir") return ModelKind::seir;
  return std::nullopt;
}

/// Transmission rate, recovery rate, incubation exit rate, mixing exponent.
enum class Param : std::size_t { beta = 0, gamma = 1, delta = 2, v = 3 };

inline constexpr std::size_t kParamCount = 4;
inline constexpr std::array<Param, kParamCount> kAllParams{
    Param::beta, Param::gamma, Param::delta, Param::v};

inline constexpr std::size_t index_of(Param p) {
  return static_cast<std::size_t>(p);
}

inline std::string_view param_name(Param p) {
  switch (p) {
    case Param::beta: return "beta";
    case Param::gamma: return "gamma";
    case Param::delta: return "delta";
    case Param::v: return "v";
  }
  return "?";
}

inline std::optional<Param> param_from_name(std::string_view name) {
  for (Param p : kAllParams) {
    if (param_name(p) == name) return p;
  }
  return std::nullopt;
}

/// Strictly positive model rates plus the mask of which ones a sampler moves.
/// Inferred coordinates are always ordered beta, gamma, delta, v.
class ParameterVector {
 public:
  ParameterVector(double beta, double gamma, double delta, double v,
                  std::array<bool, kParamCount> inferred = {})
      : values_{beta, gamma, delta, v}, inferred_(inferred) {
    for (Param p : kAllParams) check_positive(p, values_[index_of(p)]);
  }

  double operator[](Param p) const { return values_[index_of(p)]; }
  double beta() const { return values_[0]; }
  double gamma() const { return values_[1]; }
  double delta() const { return values_[2]; }
  double v() const { return values_[3]; }

  bool inferred(Param p) const { return inferred_[index_of(p)]; }
  const std::array<bool, kParamCount>& inferred_mask() const { return inferred_; }

  std::vector<Param> inferred_params() const {
    std::vector<Param> out;
    for (Param p : kAllParams) {
      if (inferred(p)) out.push_back(p);
    }
    return out;
  }

  std::size_t inferred_count() const {
    std::size_t n = 0;
    for (bool b : inferred_) n += b ? 1 : 0;
    return n;
  }

  Eigen::VectorXd inferred_values() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(inferred_count()));
    Eigen::Index k = 0;
    for (Param p : kAllParams) {
      if (inferred(p)) out[k++] = (*this)[p];
    }
    return out;
  }

  /// Copy with the inferred coordinates replaced; the mask is unchanged.
  ParameterVector with_inferred(const Eigen::VectorXd& values) const {
    if (static_cast<std::size_t>(values.size()) != inferred_count()) {
      throw std::invalid_argument("inferred value count does not match mask");
    }
    ParameterVector out = *this;
    Eigen::Index k = 0;
    for (Param p : kAllParams) {
      if (!inferred(p)) continue;
      check_positive(p, values[k]);
      out.values_[index_of(p)] = values[k++];
    }
    return out;
  }

  ParameterVector with(Param p, double value) const {
    check_positive(p, value);
    ParameterVector out = *this;
    out.values_[index_of(p)] = value;
    return out;
  }

 private:
  static void check_positive(Param p, double value) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw std::invalid_argument("parameter " + std::string(param_name(p)) +
                                  " must be finite and strictly positive");
    }
  }

  std::array<double, kParamCount> values_;
  std::array<bool, kParamCount> inferred_;
};

/// Basic reproduction number beta / gamma.
inline double r0(double beta, double gamma) {
  if (!(gamma > 0.0)) throw std::domain_error("r0 requires gamma > 0");
  return beta / gamma;
}

inline double r0(const ParameterVector& theta) {
  return r0(theta.beta(), theta.gamma());
}

}  // namespace pmcmc
