// Non-linear least-squares fitting of rate functions to windowed relevance
// estimates.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "tarstop/error.hpp"
#include "tarstop/rate_models.hpp"

namespace tarstop {

namespace {

constexpr double kHyperbolicSingular = 1e-9;
constexpr double kThetaLimit = 700.0;

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

double logistic(double t) {
  return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

double logit(double p) { return std::log(p / (1.0 - p)); }

// The optimiser works on an unconstrained vector theta; these maps carry it
// to and from the natural parameters (a, b, c).
RateParams params_from_theta(RateKind kind, const Vec& theta, std::int64_t n_total) {
  auto ex = [](double t) { return std::exp(std::clamp(t, -kThetaLimit, kThetaLimit)); };
  switch (kind) {
  case RateKind::Exponential: return RateParams::exponential(ex(theta[0]), -ex(theta[1]));
  case RateKind::PowerLaw: return RateParams::power_law(ex(theta[0]), -ex(theta[1]));
  case RateKind::Hyperbolic:
    return RateParams::hyperbolic(ex(theta[0]), logistic(theta[1]), ex(theta[2]));
  case RateKind::APPrior: return RateParams::ap_prior(ex(theta[0]), n_total);
  }
  return {};
}

Vec theta_from_params(const RateParams& p) {
  Vec t(static_cast<Eigen::Index>(p.arity()));
  t[0] = std::log(p.a);
  switch (p.kind) {
  case RateKind::Exponential:
  case RateKind::PowerLaw: t[1] = std::log(-p.b); break;
  case RateKind::Hyperbolic:
    t[1] = logit(p.b);
    t[2] = std::log(p.c);
    break;
  case RateKind::APPrior: break;
  }
  return t;
}

// d(natural)/d(theta), diagonal because each map is coordinate-wise.
std::array<double, 3> chain_factors(const RateParams& p) {
  switch (p.kind) {
  case RateKind::Exponential:
  case RateKind::PowerLaw: return {p.a, p.b, 0.0};
  case RateKind::Hyperbolic: return {p.a, p.b * (1.0 - p.b), p.c};
  case RateKind::APPrior: return {p.a, 0.0, 0.0};
  }
  return {};
}

// Partial derivatives of lambda(x) with respect to the natural parameters.
std::array<double, 3> natural_gradient(const RateParams& p, double x) {
  switch (p.kind) {
  case RateKind::Exponential: {
    const double e = std::exp(p.b * x);
    return {e, p.a * e * x, 0.0};
  }
  case RateKind::PowerLaw: {
    const double e = std::pow(x, p.b);
    return {e, p.a * e * std::log(x), 0.0};
  }
  case RateKind::APPrior: {
    const double n = static_cast<double>(p.n_total);
    return {std::log(n / x) / ap_prior_normalizer(p.n_total), 0.0, 0.0};
  }
  case RateKind::Hyperbolic: {
    const double cx = p.c * x;
    if (p.b < kHyperbolicSingular) {
      const double e = std::exp(-cx);
      const double lam = p.a * e;
      return {e, lam * cx * cx / 2.0, -lam * x};
    }
    const double q = p.b * cx;
    const double g = std::log1p(q) / p.b;
    const double e = std::exp(-g);
    const double lam = p.a * e;
    double dg_db;
    if (std::abs(q) < 1e-3) {
      // series of (q/(1+q) - log(1+q)) / b^2, free of cancellation
      dg_db = cx * cx * (-0.5 + q * (2.0 / 3.0 + q * (-0.75 + q * (0.8 - q * 5.0 / 6.0))));
    } else {
      dg_db = (q / (1.0 + q) - std::log1p(q)) / (p.b * p.b);
    }
    return {e, -lam * dg_db, -lam * x / (1.0 + q)};
  }
  }
  return {};
}

struct Evaluation {
  Vec residual;
  double cost = 0.0; // 0.5 * |r|^2
  bool finite = true;
};

Evaluation evaluate(const RateParams& p, const WindowedEstimates& pts) {
  Evaluation ev;
  ev.residual.resize(static_cast<Eigen::Index>(pts.points.size()));
  for (std::size_t k = 0; k < pts.points.size(); ++k) {
    const double r = rate_value(p, pts.points[k].x) - pts.points[k].y;
    ev.residual[static_cast<Eigen::Index>(k)] = r;
    if (!std::isfinite(r)) ev.finite = false;
  }
  ev.cost = 0.5 * ev.residual.squaredNorm();
  if (!std::isfinite(ev.cost)) ev.finite = false;
  return ev;
}

Mat natural_jacobian(const RateParams& p, const WindowedEstimates& pts) {
  const auto m = static_cast<Eigen::Index>(pts.points.size());
  const auto np = static_cast<Eigen::Index>(p.arity());
  Mat j(m, np);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto g = natural_gradient(p, pts.points[static_cast<std::size_t>(k)].x);
    for (Eigen::Index c = 0; c < np; ++c) j(k, c) = g[static_cast<std::size_t>(c)];
  }
  return j;
}

Mat theta_jacobian(const RateParams& p, const WindowedEstimates& pts) {
  Mat j = natural_jacobian(p, pts);
  const auto f = chain_factors(p);
  for (Eigen::Index c = 0; c < j.cols(); ++c) j.col(c) *= f[static_cast<std::size_t>(c)];
  return j;
}

// Slope of an ordinary least-squares line through (u, v).
bool regression_slope(const std::vector<double>& u, const std::vector<double>& v, double& slope) {
  const std::size_t n = u.size();
  if (n < 2) return false;
  double mu = 0.0, mv = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mu += u[k];
    mv += v[k];
  }
  mu /= static_cast<double>(n);
  mv /= static_cast<double>(n);
  double suu = 0.0, suv = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    suu += (u[k] - mu) * (u[k] - mu);
    suv += (u[k] - mu) * (v[k] - mv);
  }
  if (!(suu > 0.0)) return false;
  slope = suv / suu;
  return std::isfinite(slope);
}

RateParams initial_params(const WindowedEstimates& pts, RateKind kind, std::int64_t n_total) {
  double y_max = 0.0;
  std::vector<double> xs, log_xs, log_ys;
  for (const auto& pt : pts.points) {
    y_max = std::max(y_max, pt.y);
    if (pt.y > 0.0) {
      xs.push_back(pt.x);
      log_xs.push_back(std::log(pt.x));
      log_ys.push_back(std::log(pt.y));
    }
  }
  const double x_last = pts.points.back().x;
  double slope = 0.0;
  switch (kind) {
  case RateKind::Exponential: {
    const double b0 = regression_slope(xs, log_ys, slope) && slope < 0.0 ? slope : -1.0 / x_last;
    return RateParams::exponential(y_max, b0);
  }
  case RateKind::PowerLaw: {
    const double b0 = regression_slope(log_xs, log_ys, slope) && slope < 0.0 ? slope : -0.5;
    return RateParams::power_law(y_max, b0);
  }
  case RateKind::Hyperbolic: {
    const double c0 = regression_slope(xs, log_ys, slope) && slope < 0.0 ? -slope : 0.01;
    return RateParams::hyperbolic(y_max, 0.5, c0);
  }
  case RateKind::APPrior: return RateParams::ap_prior(y_max, n_total);
  }
  return {};
}

// s^2 (J^T J)^{-1} diagonal in natural coordinates; +inf when singular or
// without residual degrees of freedom.
std::vector<double> parameter_variance(const RateParams& p, const WindowedEstimates& pts,
                                       double sse) {
  const std::size_t np = p.arity();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> out(np, inf);
  if (pts.points.size() <= np) return out;
  Mat j = natural_jacobian(p, pts);
  if (!j.allFinite()) return out;
  Vec scale(j.cols());
  for (Eigen::Index c = 0; c < j.cols(); ++c) {
    scale[c] = j.col(c).norm();
    if (!(scale[c] > 0.0)) return out;
    j.col(c) /= scale[c];
  }
  Eigen::JacobiSVD<Mat> svd(j, Eigen::ComputeThinV);
  const Vec& sv = svd.singularValues();
  if (!(sv[sv.size() - 1] > 1e-9 * sv[0])) return out;
  const double s2 = sse / static_cast<double>(pts.points.size() - np);
  const Mat& v = svd.matrixV();
  for (Eigen::Index c = 0; c < j.cols(); ++c) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < sv.size(); ++k) acc += v(c, k) * v(c, k) / (sv[k] * sv[k]);
    out[static_cast<std::size_t>(c)] = s2 * acc / (scale[c] * scale[c]);
  }
  return out;
}

} // namespace

RateCurve fit_rate(const WindowedEstimates& pts, RateKind kind, std::int64_t n_total,
                   const FitOptions& opt) {
  if (pts.points.size() < 3) {
    throw InsufficientDataError("rate fitting needs at least 3 points, have " +
                                std::to_string(pts.points.size()));
  }
  if (std::none_of(pts.points.begin(), pts.points.end(), [](const WindowPoint& p) { return p.y > 0.0; })) {
    throw DegenerateDataError("no relevant documents in the fitted points");
  }
  if (kind == RateKind::APPrior && n_total < 2) throw DomainError("AP-Prior fit needs n_total >= 2");

  Vec theta = theta_from_params(initial_params(pts, kind, n_total));
  RateParams params = params_from_theta(kind, theta, n_total);
  Evaluation current = evaluate(params, pts);
  if (!current.finite) throw FitFailureError("rate function not finite at the starting point");

  double y_scale = 0.0;
  for (const auto& pt : pts.points) y_scale += pt.y * pt.y;
  const double cost_floor = 1e-32 * std::max(1.0, y_scale);

  double mu = -1.0;
  double nu = 2.0;
  bool converged = false;
  std::size_t iter = 0;
  for (; iter < opt.max_iterations && !converged; ++iter) {
    if (current.cost <= cost_floor) {
      converged = true;
      break;
    }
    const Mat jac = theta_jacobian(params, pts);
    if (!jac.allFinite()) throw FitFailureError("non-finite Jacobian during rate fitting");
    const Mat hess = jac.transpose() * jac;
    const Vec grad = jac.transpose() * current.residual;

    // scaled gradient test: cosine between residual and each Jacobian column
    const double rnorm = current.residual.norm();
    double gmax = 0.0;
    for (Eigen::Index c = 0; c < jac.cols(); ++c) {
      const double cn = jac.col(c).norm();
      if (cn > 0.0) gmax = std::max(gmax, std::abs(grad[c]) / (cn * rnorm));
    }
    if (gmax <= opt.gtol) {
      converged = true;
      break;
    }

    Vec diag = hess.diagonal().cwiseMax(1e-30);
    if (mu < 0.0) mu = 1e-3 * diag.maxCoeff();

    bool stepped = false;
    while (!stepped) {
      Mat damped = hess;
      damped.diagonal() += mu * diag;
      const Vec delta = damped.ldlt().solve(-grad);
      if (!delta.allFinite()) {
        mu *= nu;
        nu *= 2.0;
        if (mu > 1e30) break;
        continue;
      }
      if (delta.norm() <= opt.xtol * (theta.norm() + opt.xtol)) {
        converged = true;
        break;
      }
      const Vec trial_theta = theta + delta;
      const RateParams trial_params = params_from_theta(kind, trial_theta, n_total);
      const Evaluation trial = evaluate(trial_params, pts);
      const double predicted = 0.5 * delta.dot(mu * diag.cwiseProduct(delta) - grad);
      const double actual = current.cost - trial.cost;
      const double rho = trial.finite && predicted > 0.0 ? actual / predicted : -1.0;
      if (rho > 0.0) {
        const bool small_gain = actual <= opt.ftol * current.cost;
        theta = trial_theta;
        params = trial_params;
        current = trial;
        const double t = 2.0 * rho - 1.0;
        mu *= std::max(1.0 / 3.0, 1.0 - t * t * t);
        nu = 2.0;
        stepped = true;
        if (small_gain) converged = true;
      } else {
        mu *= nu;
        nu *= 2.0;
        // no descent direction left at any damping: a stationary point
        if (mu > 1e30) {
          converged = true;
          break;
        }
      }
    }
    if (!stepped && !converged) break;
  }

  if (!converged) {
    throw FitFailureError("rate fit did not converge after " + std::to_string(iter) + " iterations");
  }
  if (!is_valid(params)) throw FitFailureError("rate fit produced invalid parameters");

  RateCurve curve;
  curve.params = params;
  curve.points_used = pts.points.size();
  curve.iterations = iter;
  curve.param_variance = parameter_variance(params, pts, 2.0 * current.cost);
  curve.nrmse = nrmse(curve, pts);
  if (!std::isfinite(curve.nrmse)) throw FitFailureError("rate fit produced a non-finite NRMSE");
  return curve;
}

} // namespace tarstop
