#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tarstop {

/// Families of rate function lambda(x) describing how the probability of
/// relevance decays with rank x.
enum class RateKind { Exponential, Hyperbolic, PowerLaw, APPrior };

inline constexpr RateKind kAllRateKinds[] = {RateKind::Exponential, RateKind::Hyperbolic,
                                             RateKind::PowerLaw, RateKind::APPrior};

/// Short CLI name: exp, hyp, pow, ap.
std::string_view short_name(RateKind kind);
std::string_view long_name(RateKind kind);
/// Accepts either the short or the long name; throws ConfigError otherwise.
RateKind parse_rate_kind(std::string_view name);

/// Parameters of one rate function.
///
///   Exponential  a * exp(b x)                      (a, b)
///   Hyperbolic   a / (1 + b c x)^(1/b), 0<=b<=1    (a, b, c)
///   PowerLaw     a * x^b                           (a, b)
///   APPrior      a * log(n/x) / (n log n - log n!) (a), n = n_total
struct RateParams {
  RateKind kind = RateKind::Exponential;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  std::int64_t n_total = 0;

  static RateParams exponential(double a, double b) { return {RateKind::Exponential, a, b, 0.0, 0}; }
  static RateParams hyperbolic(double a, double b, double c) { return {RateKind::Hyperbolic, a, b, c, 0}; }
  static RateParams power_law(double a, double b) { return {RateKind::PowerLaw, a, b, 0.0, 0}; }
  static RateParams ap_prior(double a, std::int64_t n_total) { return {RateKind::APPrior, a, 0.0, 0.0, n_total}; }

  /// Number of free parameters for the kind (n_total is not free).
  std::size_t arity() const;
  /// Free parameters in canonical order (a, b, c).
  std::vector<double> values() const;
  static RateParams from_values(RateKind kind, std::span<const double> values, std::int64_t n_total);

  bool operator==(const RateParams&) const = default;
};

std::size_t arity(RateKind kind);

/// Structural validity: a > 0, hyperbolic 0 <= b <= 1 and c > 0, AP-Prior n_total >= 2.
bool is_valid(const RateParams& params) noexcept;
/// Valid and non-increasing in x (exponential and power-law b <= 0).
bool is_admissible(const RateParams& params) noexcept;
/// Throws DomainError naming the violated constraint.
void validate(const RateParams& params);

/// n log n - log n!, with log n! from lgamma.
double ap_prior_normalizer(std::int64_t n);

/// lambda(x). Throws DomainError outside the kind's domain
/// (power law x <= 0, AP-Prior x outside [1, n_total]).
double rate_value(const RateParams& params, double x);

/// Lambda(i, j) = integral of lambda over [i, j] in closed form. Throws
/// ArgumentError when i > j.
double rate_integral(const RateParams& params, double i, double j);

struct WindowPoint {
  double x; ///< window centre rank
  double y; ///< mean relevance within the window
};

struct WindowedEstimates {
  std::vector<WindowPoint> points;
  std::size_t window_size = 0;
};

/// Non-overlapping windows over the screened labels. A trailing window
/// shorter than window_size/2 is dropped; otherwise it is averaged over its
/// actual length. Throws InsufficientDataError when fewer than window_size
/// labels are supplied.
WindowedEstimates window_estimates(std::span<const std::uint8_t> labels, std::size_t window_size);

/// A fitted rate function.
struct RateCurve {
  RateParams params;
  /// One variance per free parameter; +inf when the approximate Hessian was
  /// singular or there were no residual degrees of freedom.
  std::vector<double> param_variance;
  double nrmse = 0.0;
  std::size_t points_used = 0;
  std::size_t iterations = 0;

  bool has_finite_variance() const;
  bool has_zero_variance() const;
};

struct FitOptions {
  std::size_t max_iterations = 500;
  double ftol = 1e-12;
  double xtol = 1e-12;
  double gtol = 1e-12;
};

/// Least-squares fit of lambda to the windowed estimates with a damped
/// Gauss-Newton (Levenberg-Marquardt) iteration. Bounds are enforced through
/// the parameterisation: a, c > 0 via exp, hyperbolic b in (0, 1) via a
/// logistic map, exponential and power-law b < 0 via -exp.
///
/// Throws InsufficientDataError (< 3 points), DegenerateDataError (all y == 0),
/// FitFailureError (no convergence) or UndefinedRangeError (constant y).
RateCurve fit_rate(const WindowedEstimates& points, RateKind kind, std::int64_t n_total,
                   const FitOptions& options = {});

/// sqrt(mean((yhat - y)^2)) / (y_max - y_min).
double nrmse(std::span<const double> predicted, std::span<const double> observed);
double nrmse(const RateCurve& curve, const WindowedEstimates& points);

} // namespace tarstop
