#include "sseval/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "sseval/error.hpp"
#include "sseval/rng.hpp"

namespace sseval {

double IsotonicMap::operator()(double proxy) const {
  if (breakpoints.empty()) throw PreconditionError("empty isotonic map");
  auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), proxy);
  if (it == breakpoints.begin()) return values.front();
  return values[static_cast<std::size_t>(it - breakpoints.begin()) - 1];
}

std::string IsotonicMap::to_json() const {
  nlohmann::json j;
  j["breakpoints"] = breakpoints;
  j["values"] = values;
  return j.dump(2) + "\n";
}

IsotonicMap IsotonicMap::from_json(const std::string& text) {
  IsotonicMap map;
  try {
    const auto j = nlohmann::json::parse(text);
    map.breakpoints = j.at("breakpoints").get<std::vector<double>>();
    map.values = j.at("values").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("isotonic map: ") + e.what());
  }
  if (map.breakpoints.empty() || map.breakpoints.size() != map.values.size()) {
    throw ParseError("isotonic map: breakpoints and values must be nonempty and of equal length");
  }
  for (std::size_t i = 1; i < map.breakpoints.size(); ++i) {
    if (!(map.breakpoints[i] > map.breakpoints[i - 1]) || map.values[i] < map.values[i - 1]) {
      throw ParseError("isotonic map: breakpoints must increase and values must not decrease");
    }
  }
  return map;
}

Eigen::VectorXd pava(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& w) {
  const Eigen::Index n = y.size();
  if (w.size() != n) throw PreconditionError("pava: weights and values differ in length");
  // Blocks on a stack: mean, weight, count. A block is merged with its left
  // neighbour until the means are nondecreasing again.
  std::vector<double> mean, weight;
  std::vector<Eigen::Index> count;
  mean.reserve(static_cast<std::size_t>(n));
  weight.reserve(static_cast<std::size_t>(n));
  count.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    mean.push_back(y[i]);
    weight.push_back(w[i]);
    count.push_back(1);
    while (mean.size() > 1 && mean[mean.size() - 2] > mean.back()) {
      const double wb = weight.back(), mb = mean.back();
      const Eigen::Index cb = count.back();
      mean.pop_back();
      weight.pop_back();
      count.pop_back();
      const double wt = weight.back() + wb;
      mean.back() = (weight.back() * mean.back() + wb * mb) / wt;
      weight.back() = wt;
      count.back() += cb;
    }
  }
  Eigen::VectorXd fitted(n);
  Eigen::Index pos = 0;
  for (std::size_t b = 0; b < mean.size(); ++b) {
    fitted.segment(pos, count[b]).setConstant(mean[b]);
    pos += count[b];
  }
  return fitted;
}

IsotonicMap fit_isotonic(const Eigen::Ref<const Eigen::VectorXd>& proxy, const Eigen::Ref<const Eigen::VectorXd>& loss) {
  const Eigen::Index n = proxy.size();
  if (n == 0) throw PreconditionError("fit_isotonic: no points");
  if (loss.size() != n) throw PreconditionError("fit_isotonic: proxy and loss differ in length");
  if (!proxy.allFinite() || !loss.allFinite()) throw PreconditionError("fit_isotonic: non-finite input");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return proxy[a] < proxy[b]; });

  std::vector<double> xs, sums, counts;
  for (Eigen::Index idx : order) {
    if (xs.empty() || proxy[idx] != xs.back()) {
      xs.push_back(proxy[idx]);
      sums.push_back(0.0);
      counts.push_back(0.0);
    }
    sums.back() += loss[idx];
    counts.back() += 1.0;
  }
  const auto k = static_cast<Eigen::Index>(xs.size());
  Eigen::VectorXd y(k), w(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    y[i] = sums[static_cast<std::size_t>(i)] / counts[static_cast<std::size_t>(i)];
    w[i] = counts[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd fitted = pava(y, w);
  IsotonicMap map;
  map.breakpoints = std::move(xs);
  map.values.assign(fitted.data(), fitted.data() + fitted.size());
  return map;
}

IsotonicMap fit_isotonic(const std::vector<std::pair<double, double>>& points) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(points.size())), y(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    x[static_cast<Eigen::Index>(i)] = points[i].first;
    y[static_cast<Eigen::Index>(i)] = points[i].second;
  }
  return fit_isotonic(x, y);
}

double apply(const IsotonicMap& map, double proxy) { return map(proxy); }

Eigen::VectorXd apply(const IsotonicMap& map, const Eigen::Ref<const Eigen::VectorXd>& proxies) {
  return proxies.unaryExpr([&](double x) { return map(x); });
}

std::pair<Population, Population> split_half(const Population& pop, std::uint64_t seed) {
  const std::size_t n = pop.size();
  if (n < 4) throw PreconditionError("split_half needs at least 4 units, got " + std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed, 0);
  const std::size_t cal_size = (n + 1) / 2;
  for (std::size_t i = 0; i < cal_size; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(perm[i], perm[j]);
  }
  std::vector<std::size_t> cal(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(cal_size));
  std::vector<std::size_t> eval(perm.begin() + static_cast<std::ptrdiff_t>(cal_size), perm.end());
  std::sort(cal.begin(), cal.end());
  std::sort(eval.begin(), eval.end());
  return {pop.subset(cal), pop.subset(eval)};
}

}  // namespace sseval
