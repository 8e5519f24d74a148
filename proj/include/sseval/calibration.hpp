#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sseval/core.hpp"

namespace sseval {

/// Monotone step function: breakpoints strictly increasing, values nondecreasing.
struct IsotonicMap {
  std::vector<double> breakpoints;
  std::vector<double> values;

  /// Right-continuous step evaluation, clamped to the end values outside the range.
  double operator()(double proxy) const;

  std::string to_json() const;
  static IsotonicMap from_json(const std::string& text);
};

/// Weighted pool-adjacent-violators: least-squares nondecreasing fit of y.
Eigen::VectorXd pava(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& w);

/// Isotonic regression of loss on proxy. Equal proxies are pooled before fitting.
IsotonicMap fit_isotonic(const Eigen::Ref<const Eigen::VectorXd>& proxy,
                         const Eigen::Ref<const Eigen::VectorXd>& loss);
IsotonicMap fit_isotonic(const std::vector<std::pair<double, double>>& points);

double apply(const IsotonicMap& map, double proxy);
Eigen::VectorXd apply(const IsotonicMap& map, const Eigen::Ref<const Eigen::VectorXd>& proxies);

/// Random halves (calibration, evaluation) of sizes ceil(N/2) and floor(N/2),
/// each kept in canonical order. Needs N >= 4.
std::pair<Population, Population> split_half(const Population& pop, std::uint64_t seed);

}  // namespace sseval
