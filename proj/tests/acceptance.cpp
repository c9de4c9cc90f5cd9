// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "cli_app.hpp"
#include "oracles.hpp"
#include "tarstop/baselines.hpp"
#include "tarstop/corpus_io.hpp"
#include "tarstop/eval_metrics.hpp"
#include "tarstop/point_process.hpp"
#include "tarstop/random.hpp"
#include "tarstop/rate_models.hpp"
#include "tarstop/stopping_engine.hpp"

using namespace tarstop;
namespace fs = std::filesystem;

namespace {

const std::string kData = TARSTOP_TEST_DATA;

struct Verdict {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += "failed: " + what;
    }
  }
  void note(const std::string& s) {
    if (pass) detail += (detail.empty() ? "" : "; ") + s;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

RateParams random_params(RateKind kind, std::mt19937_64& gen) {
  auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); };
  switch (kind) {
  case RateKind::Exponential:
    return RateParams::exponential(u(0.01, 2.0), u(-0.05, 0.0));
  case RateKind::Hyperbolic:
    return RateParams::hyperbolic(u(0.01, 2.0), u(0.0, 1.0), u(1e-4, 0.1));
  case RateKind::PowerLaw:
    return RateParams::power_law(u(0.01, 2.0), u(-3.0, 0.0));
  case RateKind::APPrior:
    return RateParams::ap_prior(u(0.1, 100.0), static_cast<std::int64_t>(u(100.0, 100000.0)));
  }
  return {};
}

Verdict closed_form_integrals() {
  Verdict v;
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 gen(1);
  double worst = 0.0;
  for (RateKind k : kAllRateKinds) {
    int failures = 0;
    for (int draw = 0; draw < 1000; ++draw) {
      const auto p = random_params(k, gen);
      const double hi = k == RateKind::APPrior ? static_cast<double>(p.n_total) : 10000.0;
      const double i = std::uniform_real_distribution<double>(1.0, hi / 2.0)(gen);
      const double j = std::uniform_real_distribution<double>(i, hi)(gen);
      const double numeric = oracle::simpson_log([&](double x) { return rate_value(p, x); }, i, j, 4000);
      const double err = std::abs(rate_integral(p, i, j) - numeric) / std::max(numeric, 1e-12);
      worst = std::max(worst, err);
      failures += err >= 1e-6;
    }
    v.require(failures == 0, std::to_string(failures) + " " + std::string(long_name(k)) + " draws off");
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  v.require(secs < 10.0, "runtime " + fmt("%.2f s", secs));
  v.note("4000 draws, worst relative error " + fmt("%.2e", worst));
  return v;
}

Verdict reference_constants() {
  Verdict v;
  const double pow_mass = rate_integral(RateParams::power_law(1.0, -2.0), 10.0, 100.0);
  v.require(std::abs(pow_mass - 0.09) <= 1e-12, "power integral " + fmt("%.15g", pow_mass));
  const double flat = rate_integral(RateParams::exponential(0.05, 0.0), 10.0, 100.0);
  v.require(std::abs(flat - 4.5) <= 1e-12, "homogeneous mean " + fmt("%.15g", flat));
  v.require(adapted_target_size(0.7, 0.95) == 10, "t(0.7,0.95)");
  v.require(adapted_target_size(0.9, 0.95) == 30, "t(0.9,0.95)");
  v.require(adapted_target_size(0.99, 0.95) == 300, "t(0.99,0.95)");
  v.note("power mass " + fmt("%.12f", pow_mass) + ", homogeneous mean " + fmt("%.12f", flat) + ", sizes 10/30/300");
  return v;
}

Verdict poisson_quantiles() {
  Verdict v;
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> mean_d(0.0, 50.0), p_d(0.01, 0.999);
  int mismatches = 0;
  for (int rep = 0; rep < 10000; ++rep) {
    const double mean = mean_d(gen), p = p_d(gen);
    const auto q = poisson_quantile(mean, p);
    const bool ok = oracle::poisson_cdf(mean, q) >= p && oracle::poisson_cdf(mean, q - 1) < p &&
                    q == oracle::poisson_quantile(mean, p);
    mismatches += !ok;
  }
  v.require(mismatches == 0, std::to_string(mismatches) + " mismatches");
  v.note("10000 pairs, exact agreement");
  return v;
}

Verdict fit_recovery() {
  Verdict v;
  const RateParams truths[] = {RateParams::exponential(0.5, -0.01), RateParams::hyperbolic(0.3, 0.5, 0.02),
                               RateParams::power_law(1.0, -1.2), RateParams::ap_prior(50.0, 5000)};
  const auto sample = [](const RateParams& p) {
    WindowedEstimates w;
    w.window_size = 20;
    for (double x = 10.0; x <= 490.0; x += 20.0) w.points.push_back({x, rate_value(p, x)});
    return w;
  };
  double worst = 0.0, worst_nrmse = 0.0;
  for (const auto& truth : truths) {
    const auto curve = fit_rate(sample(truth), truth.kind, 5000);
    const auto got = curve.params.values(), want = truth.values();
    for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, rel_diff(got[i], want[i]));
    worst_nrmse = std::max(worst_nrmse, curve.nrmse);
  }
  v.require(worst < 1e-2, "parameter error " + fmt("%.2e", worst));
  v.require(worst_nrmse < 1e-4, "nrmse " + fmt("%.2e", worst_nrmse));

  const auto w = sample(RateParams::exponential(0.5, -0.01));
  const auto ex = fit_rate(w, RateKind::Exponential, 5000);
  const auto hyp = fit_rate(w, RateKind::Hyperbolic, 5000);
  double limit = 0.0;
  for (const auto& p : w.points) limit = std::max(limit, rel_diff(rate_value(hyp.params, p.x), rate_value(ex.params, p.x)));
  v.require(limit < 1e-3, "hyperbolic limit " + fmt("%.2e", limit));
  v.note("worst parameter error " + fmt("%.2e", worst) + ", nrmse " + fmt("%.2e", worst_nrmse) +
         ", hyperbolic b=" + fmt("%.1e", hyp.params.b) + " vs exponential " + fmt("%.2e", limit));
  return v;
}

RateCurve curve_of(const RateParams& p, std::vector<double> variance) {
  RateCurve c;
  c.params = p;
  c.param_variance = std::move(variance);
  c.nrmse = 0.01;
  c.points_used = 10;
  return c;
}

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
      inside = inside && std::abs(e) <= 3.0;
      theta[k] = mu[k] + e * std::sqrt(c.param_variance[k]);
    }
    const auto p = RateParams::from_values(c.params.kind, theta, c.params.n_total);
    if (!inside || !is_valid(p) || !is_admissible(p)) continue;
    sum += rate_integral(p, i, j);
    ++kept;
  }
  return sum / draws;
}

Verdict cox_consistency() {
  Verdict v;
  const RateCurve fixed[] = {curve_of(RateParams::exponential(0.5, -0.01), {0.0, 0.0}),
                             curve_of(RateParams::hyperbolic(0.3, 0.5, 0.02), {0.0, 0.0, 0.0}),
                             curve_of(RateParams::power_law(1.0, -1.2), {0.0, 0.0}),
                             curve_of(RateParams::ap_prior(20.0, 3000), {0.0})};
  for (const auto& c : fixed) {
    const auto ip = estimate_remaining_ip(c, 301.0, 3000.0, 0.95);
    const auto cox = estimate_remaining_cox(c, 301.0, 3000.0, 0.95);
    v.require(cox.lambda_mass == ip.lambda_mass && cox.upper_bound == ip.upper_bound,
              "zero variance " + std::string(long_name(c.params.kind)));
  }
  const auto ex = curve_of(RateParams::exponential(0.5, -0.01), {1e-4, 1e-8});
  const auto hyp = curve_of(RateParams::hyperbolic(0.4, 0.5, 0.01), {4e-4, 1e-2, 4e-7});
  const double e1 = rel_diff(cox_mixture(ex, 100.0, 1000.0, 9).mean(), monte_carlo_mean(ex, 100.0, 1000.0, 100000, 99));
  const double e2 = rel_diff(cox_mixture(hyp, 201.0, 5000.0, 9).mean(), monte_carlo_mean(hyp, 201.0, 5000.0, 100000, 17));
  v.require(e1 < 0.02, "exponential mixture mean off by " + fmt("%.3f", e1));
  v.require(e2 < 0.02, "hyperbolic mixture mean off by " + fmt("%.3f", e2));
  v.note("zero variance identical for 4 kinds; mixture vs Monte Carlo " + fmt("%.4f", e1) + ", " + fmt("%.4f", e2));
  return v;
}

RankedTopic front_loaded(std::int64_t n, std::int64_t R, std::uint64_t seed) {
  std::set<std::int64_t> ranks;
  Rng rng(seed);
  while (static_cast<std::int64_t>(ranks.size()) < R) {
    const double u = rng.uniform();
    ranks.insert(1 + static_cast<std::int64_t>(u * u * static_cast<double>(n)));
  }
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(n), 0);
  for (auto r : ranks) labels[static_cast<std::size_t>(r - 1)] = 1;
  return RankedTopic("target", labels);
}

Verdict target_guarantee() {
  Verdict v;
  const auto start = std::chrono::steady_clock::now();
  const auto topic = front_loaded(10000, 200, 11);
  const auto size = adapted_target_size(0.7, 0.95);
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto o = target_stop(topic, {size, derive_seed(20240229, std::to_string(seed))});
    hits += static_cast<double>(o.rel_found) / 200.0 >= 0.7;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  v.require(topic.total_relevant() == 200, "fixture R");
  v.require(hits >= 940, std::to_string(hits) + "/1000 runs reached recall 0.7");
  v.require(secs < 60.0, "runtime " + fmt("%.2f s", secs));
  v.note(std::to_string(hits) + "/1000 runs reached recall 0.7 with t=" + std::to_string(size) + " in " +
         fmt("%.2f s", secs));
  return v;
}

std::vector<RankedTopic> spec_topics(const std::string& file) {
  std::vector<RankedTopic> out;
  for (const auto& s : load_synthetic_specs(kData + "/" + file)) out.push_back(generate_synthetic(s));
  return out;
}

Verdict oracle_properties() {
  Verdict v;
  std::vector<std::vector<RankedTopic>> collections = {spec_topics("twenty_topics.json"),
                                                       spec_topics("exponential_50.json"),
                                                       join_all(load_run(kData + "/three_topics.run"),
                                                                load_qrels(kData + "/three_topics.qrels"))};
  int evaluated = 0;
  for (const auto& topics : collections) {
    for (double l : {0.5, 0.7, 0.8, 0.9, 0.95, 1.0}) {
      std::vector<TopicMetrics> ms;
      for (const auto& t : topics) ms.push_back(topic_metrics(oracle_stop(t, l), t, l));
      v.require(aggregate(ms).reliability == 1.0, "reliability below 1 at l=" + fmt("%.2f", l));
      ++evaluated;
    }
  }
  std::vector<std::uint8_t> labels(50, 0);
  for (int i = 1; i <= 11; ++i) labels[static_cast<std::size_t>(3 * i - 1)] = 1;
  const RankedTopic eleven("eleven", labels);
  const auto m = topic_metrics(oracle_stop(eleven, 0.8), eleven, 0.8);
  v.require(std::abs(m.recall - 9.0 / 11.0) <= 1e-9, "granularity recall " + fmt("%.12f", m.recall));
  v.note("reliability 1.0 over " + std::to_string(evaluated) + " collection/target pairs; R=11 recall " +
         fmt("%.6f", m.recall));
  return v;
}

Verdict end_to_end() {
  Verdict v;
  const auto start = std::chrono::steady_clock::now();
  const auto topics = spec_topics("exponential_50.json");
  v.require(topics.size() == 50, "collection size");
  const auto evaluate = [&](const std::function<StoppingOutcome(const RankedTopic&)>& method) {
    std::vector<TopicMetrics> ms;
    for (const auto& t : topics) ms.push_back(topic_metrics(method(t), t, 0.9));
    return aggregate(ms);
  };
  const auto with_rate = [&](RateKind k) {
    return evaluate([k](const RankedTopic& t) {
      auto c = default_config();
      c.rate_kind = k;
      return run_stopping(t, c);
    });
  };
  const auto ex = with_rate(RateKind::Exponential);
  const auto hyp = with_rate(RateKind::Hyperbolic);
  const auto pw = with_rate(RateKind::PowerLaw);
  const auto ap = with_rate(RateKind::APPrior);
  const auto orc = evaluate([](const RankedTopic& t) { return oracle_stop(t, 0.9); });

  v.require(ex.reliability >= 0.85, "exponential reliability " + fmt("%.3f", ex.reliability));
  v.require(pw.reliability >= hyp.reliability, "power vs hyperbolic reliability");
  v.require(pw.cost.mean >= hyp.cost.mean, "power vs hyperbolic cost");
  for (const auto* c : {&ex, &hyp, &pw, &ap}) {
    v.require(c->cost.mean < 1.0 && c->cost.mean > orc.cost.mean, "cost outside (oracle, 1)");
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  v.require(secs < 300.0, "runtime " + fmt("%.1f s", secs));
  v.note("reliability/cost exp " + fmt("%.2f", ex.reliability) + "/" + fmt("%.3f", ex.cost.mean) + ", hyp " +
         fmt("%.2f", hyp.reliability) + "/" + fmt("%.3f", hyp.cost.mean) + ", pow " + fmt("%.2f", pw.reliability) +
         "/" + fmt("%.3f", pw.cost.mean) + ", ap " + fmt("%.2f", ap.reliability) + "/" + fmt("%.3f", ap.cost.mean) +
         ", oracle cost " + fmt("%.3f", orc.cost.mean) + " in " + fmt("%.2f s", secs));
  return v;
}

Verdict loss_arithmetic() {
  Verdict v;
  std::size_t checked = 0, broken = 0;
  for (const auto& file : {"twenty_topics.json", "exponential_50.json"}) {
    for (const auto& t : spec_topics(file)) {
      for (double l : {0.8, 0.9}) {
        auto c = default_config();
        c.target_recall = l;
        const StoppingOutcome outcomes[] = {run_stopping(t, c), oracle_stop(t, l), target_stop(t, {10, 5}),
                                            knee_stop(t, KneeConfig{})};
        for (const auto& o : outcomes) {
          const auto m = topic_metrics(o, t, l);
          broken += m.loss_er != m.loss_r + m.loss_e;
          ++checked;
        }
      }
    }
  }
  v.require(broken == 0, std::to_string(broken) + " outputs violate the identity");
  std::vector<std::uint8_t> labels(100, 0);
  std::fill(labels.begin(), labels.begin() + 20, 1);
  const RankedTopic t("spot", labels);
  StoppingOutcome o;
  o.stop_rank = o.docs_examined = 100;
  o.rel_found = 20;
  const auto m = topic_metrics(o, t, 0.9);
  const double direct = std::pow(100.0 / 100.0, 2) * std::pow(100.0 / (20.0 + 100.0), 2);
  v.require(std::abs(m.loss_e - direct) <= 1e-15, "loss_e differs from the direct formula");
  v.require(std::abs(m.loss_e - 0.6944) <= 1e-4, "loss_e " + fmt("%.6f", m.loss_e));
  v.note("identity exact on " + std::to_string(checked) + " outputs; spot loss_e " + fmt("%.6f", m.loss_e) +
         " (direct " + fmt("%.6f", direct) + ")");
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism() {
  Verdict v;
  const fs::path dir = fs::temp_directory_path() / ("tarstop_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::vector<std::string> three = {"--run", kData + "/three_topics.run", "--qrels", kData + "/three_topics.qrels"};
  const std::vector<std::string> twenty = {"--spec", kData + "/twenty_topics.json"};
  const auto with = [](std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  struct Command {
    std::vector<std::string> args;
    std::vector<std::string> files;
  };
  const std::vector<Command> commands = {
      {with({"stop", "--process", "cox", "--trace"}, three), {"out"}},
      {with({"stop", "--format", "json", "--trace"}, twenty), {"out"}},
      {with({"evaluate", "--methods", "ip,cox,oracle"}, twenty), {"out", "pt"}},
      {with({"compare", "--methods", "ip,cox,target,target-adapted,knee"}, three), {"out", "pt"}},
      {with({"compare", "--format", "json", "--trace"}, twenty), {"out", "pt"}},
      {with({"sweep", "--processes", "ip,cox", "--rates", "exp,hyp,pow,ap", "--target-recalls", "0.8,0.9"}, twenty),
       {"out", "pt"}},
      {with({"simulate", "--methods", "ip,target,knee,oracle"}, twenty), {"out", "pt", "run", "qrels"}},
  };
  int runs = 0;
  for (const auto& cmd : commands) {
    std::vector<std::vector<std::string>> seen;
    for (const char* jobs : {"1", "1", "3", "3"}) {
      auto args = with(cmd.args, {"--jobs", jobs, "--seed", "7"});
      for (const auto& f : cmd.files) {
        const std::string flag = f == "out" ? "--output" : f == "pt" ? "--per-topic" : "--export-" + f;
        args.push_back(flag);
        args.push_back((dir / f).string());
      }
      std::ostringstream out, err;
      const int code = cli::run_cli(args, out, err);
      v.require(code == 0, cmd.args[0] + " exited " + std::to_string(code) + ": " + err.str());
      std::vector<std::string> contents;
      for (const auto& f : cmd.files) contents.push_back(slurp(dir / f));
      seen.push_back(contents);
      ++runs;
    }
    for (const auto& s : seen) v.require(s == seen[0], cmd.args[0] + " output differs between runs");
    for (const auto& c : seen[0]) v.require(!c.empty(), cmd.args[0] + " wrote an empty file");
  }
  fs::remove_all(dir);
  v.note(std::to_string(commands.size()) + " commands, " + std::to_string(runs) +
         " runs with --jobs 1 and 3, all output files byte-identical");
  return v;
}

struct Criterion {
  int id;
  const char* name;
  Verdict (*check)();
};

} // namespace

int main() {
  const Criterion criteria[] = {
      {1, "closed-form integrals", closed_form_integrals},
      {2, "reference constants", reference_constants},
      {3, "Poisson quantile", poisson_quantiles},
      {4, "fit recovery", fit_recovery},
      {5, "Cox consistency", cox_consistency},
      {6, "target method guarantee", target_guarantee},
      {7, "oracle properties", oracle_properties},
      {8, "end-to-end synthetic collection", end_to_end},
      {9, "loss_er arithmetic", loss_arithmetic},
      {10, "determinism", determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %d: %s [%.2f s] %s\n", v.pass ? "PASS" : "FAIL", c.id, c.name, secs, v.detail.c_str());
    failed += !v.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed;
}
