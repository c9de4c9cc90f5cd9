#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "tarstop/error.hpp"
#include "tarstop/point_process.hpp"

using namespace tarstop;

namespace {

RateCurve curve_of(const RateParams& p, std::vector<double> variance) {
  RateCurve c;
  c.params = p;
  c.param_variance = std::move(variance);
  c.nrmse = 0.01;
  c.points_used = 10;
  return c;
}

/// Draws parameters from the truncated normals the Cox estimate assumes and
/// averages the resulting integrals.
double monte_carlo_mean(const RateCurve& c, double i, double j, int draws, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  const auto mu = c.params.values();
  double sum = 0.0;
  int kept = 0;
  while (kept < draws) {
    std::vector<double> theta(mu.size());
    bool inside = true;
    for (std::size_t k = 0; k < mu.size(); ++k) {
      const double e = z(gen);
      if (std::abs(e) > 3.0) inside = false;
      theta[k] = mu[k] + e * std::sqrt(c.param_variance[k]);
    }
    const auto p = RateParams::from_values(c.params.kind, theta, c.params.n_total);
    if (!inside || !is_valid(p) || !is_admissible(p)) continue;
    sum += rate_integral(p, i, j);
    ++kept;
  }
  return sum / draws;
}

} // namespace

TEST_SUITE("point_process") {

TEST_CASE("process names") {
  CHECK(parse_process_kind("ip") == ProcessKind::InhomogeneousPoisson);
  CHECK(parse_process_kind("cox") == ProcessKind::Cox);
  CHECK(short_name(ProcessKind::Cox) == "cox");
  CHECK_THROWS_AS(parse_process_kind("hawkes"), ConfigError);
}

TEST_CASE("poisson pmf") {
  CHECK(poisson_pmf(4.5, 0) == doctest::Approx(std::exp(-4.5)).epsilon(1e-14));
  CHECK(poisson_pmf(4.5, 0) == doctest::Approx(0.011109).epsilon(1e-4));
  CHECK(poisson_pmf(0.0, 0) == 1.0);
  CHECK(poisson_pmf(0.0, 3) == 0.0);
  CHECK(poisson_pmf(4.5, -1) == 0.0);
  double total = 0.0;
  for (int m = 0; m <= 200; ++m) total += poisson_pmf(4.5, m);
  CHECK(std::abs(total - 1.0) < 1e-12);
  CHECK(poisson_pmf(3000.0, 3000) == doctest::Approx(1.0 / std::sqrt(2.0 * M_PI * 3000.0)).epsilon(1e-3));
}

TEST_CASE("poisson quantile examples") {
  CHECK(poisson_quantile(4.5, 0.95) == 8);
  CHECK(oracle::poisson_cdf(4.5, 8) == doctest::Approx(0.9597).epsilon(1e-4));
  CHECK(poisson_quantile(0.0, 0.5) == 0);
  CHECK(poisson_quantile(0.0, 0.999) == 0);
  CHECK(poisson_quantile(0.09, 0.95) == 1);
  CHECK(std::exp(-0.09) < 0.95);
}

TEST_CASE("poisson quantile agrees with direct summation") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> mean(0.0, 50.0), prob(0.01, 0.999);
  for (int t = 0; t < 2000; ++t) {
    const double m = mean(gen), p = prob(gen);
    const auto q = poisson_quantile(m, p);
    CHECK(q == oracle::poisson_quantile(m, p));
  }
}

TEST_CASE("poisson quantile is monotone in mean and p") {
  std::int64_t prev = 0;
  for (double m = 0.0; m <= 60.0; m += 0.05) {
    const auto q = poisson_quantile(m, 0.95);
    CHECK(q >= prev);
    prev = q;
  }
  prev = 0;
  for (double p = 0.01; p < 0.9999; p += 0.001) {
    const auto q = poisson_quantile(12.3, p);
    CHECK(q >= prev);
    prev = q;
  }
}

TEST_CASE("mixture basics") {
  CHECK_THROWS_AS(PoissonMixture(std::vector<PoissonMixture::Component>{}), DegenerateDistributionError);
  CHECK_THROWS_AS(PoissonMixture(std::vector<PoissonMixture::Component>{{1.0, 0.0}}), DegenerateDistributionError);

  const auto single = PoissonMixture::single(4.5);
  for (int m = 0; m < 20; ++m) CHECK(single.pmf(m) == doctest::Approx(poisson_pmf(4.5, m)).epsilon(1e-14));
  CHECK(single.quantile(0.95) == 8);
  CHECK(single.mean() == doctest::Approx(4.5));
  CHECK(single.variance() == doctest::Approx(4.5));

  const PoissonMixture mix({{2.0, 3.0}, {10.0, 1.0}});
  CHECK(mix.components()[0].weight == doctest::Approx(0.75));
  CHECK(mix.mean() == doctest::Approx(0.75 * 2.0 + 0.25 * 10.0));
  double m1 = 0.0, m2 = 0.0;
  for (int m = 0; m < 200; ++m) {
    m1 += m * mix.pmf(m);
    m2 += double(m) * m * mix.pmf(m);
  }
  CHECK(mix.variance() == doctest::Approx(m2 - m1 * m1).epsilon(1e-10));
}

TEST_CASE("mixture CDF is a valid CDF") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> mean(0.0, 40.0), weight(0.01, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<PoissonMixture::Component> comps;
    for (int k = 0; k < 1 + t % 7; ++k) comps.push_back({mean(gen), weight(gen)});
    const PoissonMixture mix(comps);
    double prev = 0.0;
    for (int m = 0; m < 150; ++m) {
      const double c = mix.cdf(m);
      CHECK(c >= prev);
      CHECK(c <= 1.0 + 1e-12);
      prev = c;
    }
    const double mu = mix.mean();
    CHECK(mix.cdf(static_cast<std::int64_t>(mu + 20.0 * std::sqrt(mu) + 50.0)) >= 1.0 - 1e-9);
    const auto q = mix.quantile(0.95);
    CHECK(mix.cdf(q) >= 0.95);
    if (q > 0) CHECK(mix.cdf(q - 1) < 0.95);
  }
}

TEST_CASE("inhomogeneous Poisson estimates") {
  const auto pow = curve_of(RateParams::power_law(1.0, -2.0), {0.0, 0.0});
  const auto e = estimate_remaining_ip(pow, 10.0, 100.0, 0.95);
  CHECK(std::abs(e.lambda_mass - 0.09) < 1e-12);
  CHECK(e.upper_bound == 1);
  CHECK(e.process == ProcessKind::InhomogeneousPoisson);
  CHECK_FALSE(e.cox_fallback);

  const auto empty = estimate_remaining_ip(pow, 50.0, 50.0, 0.95);
  CHECK(empty.lambda_mass == 0.0);
  CHECK(empty.upper_bound == 0);

  const auto ex = curve_of(RateParams::exponential(0.5, -0.01), {0.0, 0.0});
  const double mass = oracle::simpson([&](double x) { return 0.5 * std::exp(-0.01 * x); }, 100.0, 1000.0, 20000);
  const auto est = estimate_remaining_ip(ex, 100.0, 1000.0, 0.95);
  CHECK(est.lambda_mass == doctest::Approx(mass).epsilon(1e-9));
  CHECK(est.upper_bound == oracle::poisson_quantile(mass, 0.95));
}

TEST_CASE("IP means are additive across intervals") {
  const auto hyp = curve_of(RateParams::hyperbolic(0.4, 0.6, 0.01), {0.0, 0.0, 0.0});
  const double whole = estimate_remaining_ip(hyp, 101.0, 4000.0, 0.95).lambda_mass;
  const double parts = estimate_remaining_ip(hyp, 101.0, 1234.0, 0.95).lambda_mass +
                       estimate_remaining_ip(hyp, 1234.0, 4000.0, 0.95).lambda_mass;
  CHECK(std::abs(whole - parts) <= 1e-9 * whole);
}

TEST_CASE("Cox with zero variance equals IP") {
  const RateCurve curves[] = {curve_of(RateParams::exponential(0.5, -0.01), {0.0, 0.0}),
                              curve_of(RateParams::hyperbolic(0.3, 0.5, 0.02), {0.0, 0.0, 0.0}),
                              curve_of(RateParams::power_law(1.0, -1.2), {0.0, 0.0}),
                              curve_of(RateParams::ap_prior(20.0, 3000), {0.0})};
  for (const auto& c : curves) {
    const auto ip = estimate_remaining_ip(c, 301.0, 3000.0, 0.95);
    const auto cox = estimate_remaining_cox(c, 301.0, 3000.0, 0.95);
    CHECK(cox.lambda_mass == ip.lambda_mass);
    CHECK(cox.upper_bound == ip.upper_bound);
    CHECK_FALSE(cox.cox_fallback);
  }
}

TEST_CASE("Cox falls back to IP when a variance is not finite") {
  const auto c = curve_of(RateParams::hyperbolic(0.3, 0.5, 0.02), {1e-4, INFINITY, 1e-6});
  const auto ip = estimate_remaining_ip(c, 101.0, 2000.0, 0.95);
  const auto cox = estimate_remaining_cox(c, 101.0, 2000.0, 0.95);
  CHECK(cox.cox_fallback);
  CHECK(cox.lambda_mass == ip.lambda_mass);
  CHECK(cox.upper_bound == ip.upper_bound);
}

TEST_CASE("Cox mixture mean matches a Monte-Carlo oracle") {
  const auto c = curve_of(RateParams::exponential(0.5, -0.01), {1e-4, 1e-8});
  const double i = 100.0, j = 1000.0;
  const auto mix = cox_mixture(c, i, j, 9);
  CHECK(mix.components().size() == 81);
  const double mc = monte_carlo_mean(c, i, j, 100000, 99);
  CHECK(std::abs(mix.mean() - mc) / mc < 0.02);
  const double ip = estimate_remaining_ip(c, i, j, 0.95).lambda_mass;
  CHECK(std::abs(mix.mean() - ip) / ip < 0.02);
}

TEST_CASE("Cox mixture mean on a hyperbolic curve") {
  const auto c = curve_of(RateParams::hyperbolic(0.4, 0.5, 0.01), {4e-4, 1e-2, 4e-7});
  const auto mix = cox_mixture(c, 201.0, 5000.0, 9);
  const double mc = monte_carlo_mean(c, 201.0, 5000.0, 100000, 17);
  CHECK(std::abs(mix.mean() - mc) / mc < 0.02);
}

TEST_CASE("Cox is over-dispersed relative to IP") {
  std::mt19937_64 gen(23);
  std::uniform_real_distribution<double> a(0.2, 1.0), b(-0.02, -0.002), rel_sd(0.01, 0.1);
  for (int t = 0; t < 40; ++t) {
    const double av = a(gen), bv = b(gen);
    const double sa = rel_sd(gen) * av, sb = rel_sd(gen) * std::abs(bv);
    const auto c = curve_of(RateParams::exponential(av, bv), {sa * sa, sb * sb});
    const auto mix = cox_mixture(c, 101.0, 3000.0);
    const double ip = estimate_remaining_ip(c, 101.0, 3000.0, 0.95).lambda_mass;
    CHECK(mix.variance() >= mix.mean());
    CHECK(mix.variance() >= ip);
    const auto est = estimate_remaining_cox(c, 101.0, 3000.0, 0.95);
    CHECK(est.upper_bound >= estimate_remaining_ip(c, 101.0, 3000.0, 0.95).upper_bound);
  }
}

TEST_CASE("Cox drops constraint-violating nodes") {
  // sd of b is large enough that the upper grid rows have b > 0
  const auto c = curve_of(RateParams::exponential(0.5, -0.001), {1e-4, 1e-6});
  const auto est = estimate_remaining_cox(c, 101.0, 2000.0, 0.95);
  CHECK(est.grid_nodes < 81);
  CHECK(est.grid_nodes > 0);
  for (const auto& comp : cox_mixture(c, 101.0, 2000.0).components()) CHECK(comp.mean >= 0.0);

  const auto hopeless = curve_of(RateParams::exponential(0.5, 0.5), {1e-4, 1e-6});
  CHECK_THROWS_AS(estimate_remaining_cox(hopeless, 101.0, 2000.0, 0.95), DegenerateDistributionError);
}

TEST_CASE("Cox grid validation") {
  const auto c = curve_of(RateParams::exponential(0.5, -0.01), {1e-4, 1e-8});
  CHECK_THROWS_AS(cox_mixture(c, 1.0, 10.0, 8), ArgumentError);
  CHECK_THROWS_AS(cox_mixture(c, 1.0, 10.0, 1), ArgumentError);
  CHECK(cox_mixture(c, 1.0, 10.0, 3).components().size() == 9);
}

}
