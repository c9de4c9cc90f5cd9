#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "tarstop/rate_models.hpp"

namespace tarstop {

enum class ProcessKind { InhomogeneousPoisson, Cox };

/// "ip" or "cox".
std::string_view short_name(ProcessKind kind);
ProcessKind parse_process_kind(std::string_view name);

/// e^{-mean} mean^m / m!, evaluated in log space.
double poisson_pmf(double mean, std::int64_t m);

/// Smallest m with P(N <= m) >= p, by direct summation of the pmf.
std::int64_t poisson_quantile(double mean, double p);

/// Finite mixture of Poisson distributions, sum_k w_k Poisson(mean_k).
/// A single unit-weight component is an ordinary Poisson distribution.
class PoissonMixture {
public:
  struct Component {
    double mean;
    double weight;
  };

  PoissonMixture() = default;
  /// Weights are renormalised to sum to one. Throws DegenerateDistributionError
  /// if there are no components or no positive weight.
  explicit PoissonMixture(std::vector<Component> components);

  static PoissonMixture single(double mean) { return PoissonMixture({{mean, 1.0}}); }

  const std::vector<Component>& components() const noexcept { return components_; }

  double pmf(std::int64_t m) const;
  double cdf(std::int64_t m) const;
  /// Smallest m with cdf(m) >= p.
  std::int64_t quantile(double p) const;
  double mean() const;
  double variance() const;

private:
  std::vector<Component> components_;
};

/// Distribution of the relevant-document count over ranks [i, j].
struct RemainingEstimate {
  double interval_begin = 0.0;
  double interval_end = 0.0;
  /// Lambda(i, j), or its expectation under the Cox parameter distribution.
  double lambda_mass = 0.0;
  /// Smallest m with CDF(m) >= confidence.
  std::int64_t upper_bound = 0;
  double confidence = 0.95;
  ProcessKind process = ProcessKind::InhomogeneousPoisson;
  /// Cox was requested but the parameter variances were unusable, so the
  /// inhomogeneous Poisson estimate is reported instead.
  bool cox_fallback = false;
  /// Grid nodes that survived the parameter-constraint filter (Cox only).
  std::size_t grid_nodes = 0;
};

RemainingEstimate estimate_remaining_ip(const RateCurve& curve, double i, double j, double p);

/// Parameters ~ independent normals N(mu, sigma^2), mu = fitted value,
/// sigma^2 = its variance estimate, each truncated to mu +- 3 sigma and
/// integrated with composite Simpson weights on `grid` nodes. Nodes that
/// violate the rate constraints are dropped before renormalising.
PoissonMixture cox_mixture(const RateCurve& curve, double i, double j, int grid = 9);

/// Falls back to the IP estimate (cox_fallback = true) when any variance is
/// not finite; zero variances give exactly the IP result. Throws
/// DegenerateDistributionError when every grid node is invalid.
RemainingEstimate estimate_remaining_cox(const RateCurve& curve, double i, double j, double p,
                                         int grid = 9);

} // namespace tarstop
