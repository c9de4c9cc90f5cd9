#include "tarstop/point_process.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tarstop/error.hpp"

namespace tarstop {

namespace {

// Summation stops here even if rounding keeps the CDF a hair below p.
std::int64_t summation_limit(double max_mean) {
  return static_cast<std::int64_t>(std::ceil(max_mean + 50.0 * std::sqrt(max_mean) + 200.0));
}

struct Kahan {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double y = v - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

} // namespace

std::string_view short_name(ProcessKind kind) {
  return kind == ProcessKind::Cox ? "cox" : "ip";
}

ProcessKind parse_process_kind(std::string_view name) {
  if (name == "ip" || name == "poisson" || name == "inhomogeneous") return ProcessKind::InhomogeneousPoisson;
  if (name == "cox") return ProcessKind::Cox;
  throw ConfigError("unknown process '" + std::string(name) + "' (expected ip or cox)");
}

double poisson_pmf(double mean, std::int64_t m) {
  if (m < 0) return 0.0;
  if (mean <= 0.0) return m == 0 ? 1.0 : 0.0;
  const double md = static_cast<double>(m);
  return std::exp(md * std::log(mean) - mean - std::lgamma(md + 1.0));
}

std::int64_t poisson_quantile(double mean, double p) {
  if (mean <= 0.0) return 0;
  const double log_mean = std::log(mean);
  const std::int64_t limit = summation_limit(mean);
  double log_pmf = -mean;
  Kahan cdf;
  cdf.add(std::exp(log_pmf));
  std::int64_t m = 0;
  while (cdf.sum < p && m < limit) {
    ++m;
    log_pmf += log_mean - std::log(static_cast<double>(m));
    cdf.add(std::exp(log_pmf));
  }
  return m;
}

PoissonMixture::PoissonMixture(std::vector<Component> components) : components_(std::move(components)) {
  double total = 0.0;
  for (const auto& c : components_) {
    if (c.weight > 0.0 && std::isfinite(c.weight)) total += c.weight;
  }
  if (components_.empty() || !(total > 0.0)) {
    throw DegenerateDistributionError("mixture has no component with positive weight");
  }
  std::erase_if(components_, [](const Component& c) { return !(c.weight > 0.0) || !std::isfinite(c.weight); });
  for (auto& c : components_) c.weight /= total;
}

double PoissonMixture::pmf(std::int64_t m) const {
  Kahan acc;
  for (const auto& c : components_) acc.add(c.weight * poisson_pmf(c.mean, m));
  return acc.sum;
}

double PoissonMixture::cdf(std::int64_t m) const {
  Kahan acc;
  for (std::int64_t k = 0; k <= m; ++k) acc.add(pmf(k));
  return acc.sum;
}

std::int64_t PoissonMixture::quantile(double p) const {
  double max_mean = 0.0;
  for (const auto& c : components_) max_mean = std::max(max_mean, c.mean);
  if (max_mean <= 0.0) return 0;
  const std::int64_t limit = summation_limit(max_mean);

  std::vector<double> log_pmf(components_.size());
  std::vector<double> log_mean(components_.size());
  Kahan cdf;
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const double mu = components_[k].mean;
    log_mean[k] = mu > 0.0 ? std::log(mu) : -INFINITY;
    log_pmf[k] = mu > 0.0 ? -mu : 0.0;
    cdf.add(components_[k].weight * std::exp(log_pmf[k]));
  }
  std::int64_t m = 0;
  while (cdf.sum < p && m < limit) {
    ++m;
    const double log_m = std::log(static_cast<double>(m));
    Kahan step;
    for (std::size_t k = 0; k < components_.size(); ++k) {
      log_pmf[k] += log_mean[k] - log_m;
      step.add(components_[k].weight * std::exp(log_pmf[k]));
    }
    cdf.add(step.sum);
  }
  return m;
}

double PoissonMixture::mean() const {
  Kahan acc;
  for (const auto& c : components_) acc.add(c.weight * c.mean);
  return acc.sum;
}

double PoissonMixture::variance() const {
  Kahan second;
  for (const auto& c : components_) second.add(c.weight * (c.mean + c.mean * c.mean));
  const double mu = mean();
  return second.sum - mu * mu;
}

RemainingEstimate estimate_remaining_ip(const RateCurve& curve, double i, double j, double p) {
  RemainingEstimate est;
  est.interval_begin = i;
  est.interval_end = j;
  est.confidence = p;
  est.process = ProcessKind::InhomogeneousPoisson;
  est.lambda_mass = rate_integral(curve.params, i, j);
  est.upper_bound = poisson_quantile(est.lambda_mass, p);
  return est;
}

namespace {

struct AxisNode {
  double value;
  double weight;
};

// Composite Simpson nodes over mu +- 3 sigma, weighted by the normal density.
std::vector<AxisNode> parameter_axis(double mu, double variance, int grid) {
  if (variance == 0.0) return {{mu, 1.0}};
  const double sigma = std::sqrt(variance);
  const double h = 6.0 / (grid - 1); // in standard-deviation units
  std::vector<AxisNode> nodes;
  nodes.reserve(static_cast<std::size_t>(grid));
  for (int k = 0; k < grid; ++k) {
    const double z = -3.0 + h * k;
    const double simpson = (k == 0 || k == grid - 1) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    const double density = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    nodes.push_back({mu + sigma * z, simpson * h / 3.0 * density});
  }
  return nodes;
}

} // namespace

PoissonMixture cox_mixture(const RateCurve& curve, double i, double j, int grid) {
  if (grid < 3 || grid % 2 == 0) throw ArgumentError("Cox grid size must be an odd integer >= 3");
  if (i > j) throw ArgumentError("interval requires i <= j");
  const std::vector<double> mu = curve.params.values();
  if (curve.param_variance.size() != mu.size()) throw ArgumentError("variance arity does not match parameters");

  std::vector<std::vector<AxisNode>> axes;
  for (std::size_t d = 0; d < mu.size(); ++d) axes.push_back(parameter_axis(mu[d], curve.param_variance[d], grid));

  std::vector<PoissonMixture::Component> components;
  std::vector<std::size_t> index(axes.size(), 0);
  std::vector<double> values(axes.size());
  for (;;) {
    double weight = 1.0;
    for (std::size_t d = 0; d < axes.size(); ++d) {
      values[d] = axes[d][index[d]].value;
      weight *= axes[d][index[d]].weight;
    }
    const RateParams params = RateParams::from_values(curve.params.kind, values, curve.params.n_total);
    if (is_admissible(params)) {
      const double mass = rate_integral(params, i, j);
      if (std::isfinite(mass)) components.push_back({mass, weight});
    }
    std::size_t d = 0;
    while (d < axes.size() && ++index[d] == axes[d].size()) index[d++] = 0;
    if (d == axes.size()) break;
  }
  if (components.empty()) throw DegenerateDistributionError("every Cox grid node violates the rate constraints");
  return PoissonMixture(std::move(components));
}

RemainingEstimate estimate_remaining_cox(const RateCurve& curve, double i, double j, double p, int grid) {
  if (!curve.has_finite_variance() || curve.has_zero_variance()) {
    RemainingEstimate est = estimate_remaining_ip(curve, i, j, p);
    est.process = ProcessKind::Cox;
    est.cox_fallback = !curve.has_finite_variance();
    est.grid_nodes = 1;
    return est;
  }
  const PoissonMixture mixture = cox_mixture(curve, i, j, grid);
  RemainingEstimate est;
  est.interval_begin = i;
  est.interval_end = j;
  est.confidence = p;
  est.process = ProcessKind::Cox;
  est.lambda_mass = mixture.mean();
  est.upper_bound = mixture.quantile(p);
  est.grid_nodes = mixture.components().size();
  return est;
}

} // namespace tarstop
