#include "tarstop/rate_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tarstop/error.hpp"

namespace tarstop {

namespace {

// Below this b the hyperbolic decline is evaluated as its exponential limit;
// within this distance of 1 it is evaluated as harmonic decline.
constexpr double kHyperbolicSingular = 1e-9;

} // namespace

std::string_view short_name(RateKind kind) {
  switch (kind) {
  case RateKind::Exponential: return "exp";
  case RateKind::Hyperbolic: return "hyp";
  case RateKind::PowerLaw: return "pow";
  case RateKind::APPrior: return "ap";
  }
  return "?";
}

std::string_view long_name(RateKind kind) {
  switch (kind) {
  case RateKind::Exponential: return "exponential";
  case RateKind::Hyperbolic: return "hyperbolic";
  case RateKind::PowerLaw: return "power";
  case RateKind::APPrior: return "ap_prior";
  }
  return "?";
}

RateKind parse_rate_kind(std::string_view name) {
  for (RateKind kind : kAllRateKinds) {
    if (name == short_name(kind) || name == long_name(kind)) return kind;
  }
  if (name == "power_law") return RateKind::PowerLaw;
  if (name == "ap-prior" || name == "apprior") return RateKind::APPrior;
  throw ConfigError("unknown rate function '" + std::string(name) +
                    "' (expected exp, hyp, pow or ap)");
}

std::size_t arity(RateKind kind) {
  switch (kind) {
  case RateKind::Exponential: return 2;
  case RateKind::Hyperbolic: return 3;
  case RateKind::PowerLaw: return 2;
  case RateKind::APPrior: return 1;
  }
  return 0;
}

std::size_t RateParams::arity() const { return tarstop::arity(kind); }

std::vector<double> RateParams::values() const {
  switch (kind) {
  case RateKind::Exponential:
  case RateKind::PowerLaw: return {a, b};
  case RateKind::Hyperbolic: return {a, b, c};
  case RateKind::APPrior: return {a};
  }
  return {};
}

RateParams RateParams::from_values(RateKind kind, std::span<const double> v, std::int64_t n_total) {
  if (v.size() != tarstop::arity(kind)) {
    throw ArgumentError("parameter count does not match rate kind " + std::string(long_name(kind)));
  }
  switch (kind) {
  case RateKind::Exponential: return exponential(v[0], v[1]);
  case RateKind::Hyperbolic: return hyperbolic(v[0], v[1], v[2]);
  case RateKind::PowerLaw: return power_law(v[0], v[1]);
  case RateKind::APPrior: return ap_prior(v[0], n_total);
  }
  return {};
}

bool is_valid(const RateParams& p) noexcept {
  if (!std::isfinite(p.a) || !(p.a > 0.0)) return false;
  switch (p.kind) {
  case RateKind::Exponential:
  case RateKind::PowerLaw: return std::isfinite(p.b);
  case RateKind::Hyperbolic: return p.b >= 0.0 && p.b <= 1.0 && std::isfinite(p.c) && p.c > 0.0;
  case RateKind::APPrior: return p.n_total >= 2;
  }
  return false;
}

bool is_admissible(const RateParams& p) noexcept {
  if (!is_valid(p)) return false;
  if (p.kind == RateKind::Exponential || p.kind == RateKind::PowerLaw) return p.b <= 0.0;
  return true;
}

void validate(const RateParams& p) {
  if (!std::isfinite(p.a) || !(p.a > 0.0)) throw DomainError("rate parameter a must be > 0");
  switch (p.kind) {
  case RateKind::Exponential:
  case RateKind::PowerLaw:
    if (!std::isfinite(p.b)) throw DomainError("rate parameter b must be finite");
    break;
  case RateKind::Hyperbolic:
    if (!(p.b >= 0.0 && p.b <= 1.0)) throw DomainError("hyperbolic b must lie in [0, 1]");
    if (!std::isfinite(p.c) || !(p.c > 0.0)) throw DomainError("hyperbolic c must be > 0");
    break;
  case RateKind::APPrior:
    if (p.n_total < 2) throw DomainError("AP-Prior n_total must be >= 2");
    break;
  }
}

double ap_prior_normalizer(std::int64_t n) {
  const double nd = static_cast<double>(n);
  return nd * std::log(nd) - std::lgamma(nd + 1.0);
}

double rate_value(const RateParams& p, double x) {
  switch (p.kind) {
  case RateKind::Exponential: return p.a * std::exp(p.b * x);
  case RateKind::Hyperbolic:
    if (p.b < kHyperbolicSingular) return p.a * std::exp(-p.c * x);
    return p.a * std::exp(-std::log1p(p.b * p.c * x) / p.b);
  case RateKind::PowerLaw:
    if (!(x > 0.0)) throw DomainError("power-law rate is undefined for x <= 0");
    return p.a * std::pow(x, p.b);
  case RateKind::APPrior: {
    const double n = static_cast<double>(p.n_total);
    if (!(x >= 1.0) || x > n) throw DomainError("AP-Prior rate is defined on [1, n_total]");
    return p.a * std::log(n / x) / ap_prior_normalizer(p.n_total);
  }
  }
  return 0.0;
}

double rate_integral(const RateParams& p, double i, double j) {
  if (i > j) throw ArgumentError("rate_integral requires i <= j");
  if (i == j) return 0.0;
  switch (p.kind) {
  case RateKind::Exponential:
    if (p.b == 0.0) return p.a * (j - i);
    // (a/b)(e^{bj} - e^{bi}) = (a/b) e^{bi} (e^{b(j-i)} - 1)
    return p.a * std::exp(p.b * i) * std::expm1(p.b * (j - i)) / p.b;

  case RateKind::Hyperbolic: {
    const double a = p.a, b = p.b, c = p.c;
    if (b < kHyperbolicSingular) {
      return a / c * std::exp(-c * i) * -std::expm1(-c * (j - i));
    }
    if (std::abs(b - 1.0) < kHyperbolicSingular) {
      return a / c * (std::log1p(c * j) - std::log1p(c * i));
    }
    // a / (c (b-1)) [(1+bcx)^{1-1/b}]_i^j, rewritten so the difference and the
    // division by (b - 1) cancel analytically.
    const double li = std::log1p(b * c * i);
    const double lj = std::log1p(b * c * j);
    const double ui = (b - 1.0) / b * li;
    return a / c * std::exp(ui) * std::expm1((b - 1.0) / b * (lj - li)) / (b - 1.0);
  }

  case RateKind::PowerLaw: {
    if (!(i > 0.0)) throw DomainError("power-law integral requires i > 0");
    const double e = p.b + 1.0;
    const double log_ratio = std::log(j / i);
    if (e == 0.0) return p.a * log_ratio;
    // (a/(b+1)) (j^{b+1} - i^{b+1})
    return p.a * std::pow(i, e) * std::expm1(e * log_ratio) / e;
  }

  case RateKind::APPrior: {
    const double n = static_cast<double>(p.n_total);
    if (!(i >= 1.0) || j > n) throw DomainError("AP-Prior integral is defined on [1, n_total]");
    // d/dx [x (1 + log(n/x))] = log(n/x)
    auto antiderivative = [n](double x) { return x * (1.0 + std::log(n / x)); };
    return p.a * (antiderivative(j) - antiderivative(i)) / ap_prior_normalizer(p.n_total);
  }
  }
  return 0.0;
}

WindowedEstimates window_estimates(std::span<const std::uint8_t> labels, std::size_t window_size) {
  if (window_size == 0) throw ArgumentError("window size must be positive");
  if (labels.size() < window_size) {
    throw InsufficientDataError("need at least " + std::to_string(window_size) +
                                " screened documents, have " + std::to_string(labels.size()));
  }
  WindowedEstimates out;
  out.window_size = window_size;
  out.points.reserve(labels.size() / window_size + 1);
  for (std::size_t start = 0; start < labels.size(); start += window_size) {
    const std::size_t len = std::min(window_size, labels.size() - start);
    if (2 * len < window_size) break;
    std::size_t hits = 0;
    for (std::size_t r = start; r < start + len; ++r) hits += labels[r] != 0;
    const double centre = static_cast<double>(start) + (static_cast<double>(len) + 1.0) / 2.0;
    out.points.push_back({centre, static_cast<double>(hits) / static_cast<double>(len)});
  }
  return out;
}

bool RateCurve::has_finite_variance() const {
  return std::all_of(param_variance.begin(), param_variance.end(),
                     [](double v) { return std::isfinite(v); });
}

bool RateCurve::has_zero_variance() const {
  return std::all_of(param_variance.begin(), param_variance.end(),
                     [](double v) { return v == 0.0; });
}

double nrmse(std::span<const double> predicted, std::span<const double> observed) {
  if (predicted.size() != observed.size()) throw ArgumentError("nrmse: size mismatch");
  if (observed.size() < 2) throw InsufficientDataError("nrmse needs at least 2 points");
  const auto [lo, hi] = std::minmax_element(observed.begin(), observed.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw UndefinedRangeError("observed values are constant; NRMSE undefined");
  double sse = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double d = predicted[k] - observed[k];
    sse += d * d;
  }
  return std::sqrt(sse / static_cast<double>(observed.size())) / range;
}

double nrmse(const RateCurve& curve, const WindowedEstimates& points) {
  std::vector<double> yhat, y;
  yhat.reserve(points.points.size());
  y.reserve(points.points.size());
  for (const auto& pt : points.points) {
    yhat.push_back(rate_value(curve.params, pt.x));
    y.push_back(pt.y);
  }
  return nrmse(yhat, y);
}

} // namespace tarstop
