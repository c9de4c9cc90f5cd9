#include "tarstop/stopping_engine.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>

#include "tarstop/error.hpp"

namespace tarstop {

bool MinRelevantRule::satisfied(std::int64_t rel, std::int64_t k, std::int64_t n) const {
  if (kind == Kind::Static) return rel >= threshold;
  const double bound = 20.0 * (1.0 - static_cast<double>(k) / static_cast<double>(n));
  return static_cast<double>(rel) >= bound;
}

std::string to_string(const MinRelevantRule& rule) {
  return rule.kind == MinRelevantRule::Kind::Dynamic ? "dynamic" : "static" + std::to_string(rule.threshold);
}

MinRelevantRule parse_min_relevant_rule(std::string_view name) {
  if (name == "dynamic" || name == "gradient") return MinRelevantRule::dynamic();
  if (name.starts_with("static")) {
    const auto digits = name.substr(6);
    std::int64_t t = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), t);
    if (ec == std::errc() && ptr == digits.data() + digits.size() && t >= 1) return MinRelevantRule::fixed(t);
  }
  throw ConfigError("unknown minimum-relevant rule '" + std::string(name) +
                    "' (expected static10, static20 or dynamic)");
}

std::string_view short_name(BatchSchedule s) {
  return s == BatchSchedule::AutoTar ? "autotar" : "uniform";
}

BatchSchedule parse_batch_schedule(std::string_view name) {
  if (name == "uniform") return BatchSchedule::UniformFraction;
  if (name == "autotar") return BatchSchedule::AutoTar;
  throw ConfigError("unknown batch schedule '" + std::string(name) + "' (expected uniform or autotar)");
}

void StoppingConfig::validate() const {
  if (!(target_recall > 0.0 && target_recall <= 1.0)) throw ConfigError("target recall must lie in (0, 1]");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("confidence must lie in (0, 1)");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in (0, 1]");
  if (!(nrmse_threshold > 0.0)) throw ConfigError("NRMSE threshold must be > 0");
  if (min_rel.kind == MinRelevantRule::Kind::Static && min_rel.threshold < 1) {
    throw ConfigError("static minimum-relevant threshold must be >= 1");
  }
  if (window_size < 1) throw ConfigError("window size must be >= 1");
  if (cox_grid < 3 || cox_grid % 2 == 0) throw ConfigError("Cox grid must be an odd integer >= 3");
}

StoppingConfig default_config() { return StoppingConfig{}; }

std::int64_t tolerant_ceil(double x) {
  return static_cast<std::int64_t>(std::ceil(x - 1e-12 * std::max(1.0, std::abs(x))));
}

std::vector<std::int64_t> checkpoints(std::int64_t n, double alpha, double beta, BatchSchedule schedule) {
  std::vector<std::int64_t> out;
  const std::int64_t first = std::max<std::int64_t>(1, tolerant_ceil(alpha * static_cast<double>(n)));
  if (schedule == BatchSchedule::UniformFraction) {
    const std::int64_t step = std::max<std::int64_t>(1, tolerant_ceil(beta * static_cast<double>(n)));
    for (std::int64_t k = first; k < n; k += step) out.push_back(k);
    return out;
  }
  std::int64_t k = 0;
  for (std::int64_t batch = 1;; batch += (batch + 9) / 10) {
    k += batch;
    if (k >= n) break;
    if (k >= first) out.push_back(k);
  }
  return out;
}

std::string_view to_string(Gate gate) {
  switch (gate) {
  case Gate::TooFewRelevant: return "too_few_relevant";
  case Gate::FitFailed: return "fit_failed";
  case Gate::NrmseRejected: return "nrmse_rejected";
  case Gate::Evaluated: return "evaluated";
  }
  return "?";
}

std::size_t StoppingOutcome::cox_fallbacks() const {
  return static_cast<std::size_t>(std::count_if(traces.begin(), traces.end(), [](const IterationTrace& t) {
    return t.estimate && t.estimate->cox_fallback;
  }));
}

std::string method_label(const StoppingConfig& config) {
  return std::string(short_name(config.process)) + "-" + std::string(short_name(config.rate_kind));
}

StoppingOutcome run_stopping(const RankedTopic& topic, const StoppingConfig& config) {
  config.validate();
  const std::int64_t n = topic.n();
  StoppingOutcome out;
  out.method = method_label(config);
  out.topic_id = topic.topic_id();

  for (const std::int64_t k : checkpoints(n, config.alpha, config.beta, config.batch_schedule)) {
    IterationTrace trace;
    trace.k = k;
    trace.rel_found = topic.relevant_in_prefix(k);
    if (!config.min_rel.satisfied(trace.rel_found, k, n)) {
      trace.gate = Gate::TooFewRelevant;
      out.traces.push_back(std::move(trace));
      continue;
    }

    try {
      const auto prefix = topic.labels().first(static_cast<std::size_t>(k));
      trace.curve = fit_rate(window_estimates(prefix, config.window_size), config.rate_kind, n);
    } catch (const NumericError& e) {
      trace.gate = Gate::FitFailed;
      trace.fit_error = e.what();
      out.traces.push_back(std::move(trace));
      continue;
    }
    if (trace.curve->nrmse > config.nrmse_threshold) {
      trace.gate = Gate::NrmseRejected;
      out.traces.push_back(std::move(trace));
      continue;
    }

    const double begin = static_cast<double>(k + 1);
    const double end = static_cast<double>(n);
    try {
      trace.estimate = config.process == ProcessKind::Cox
                           ? estimate_remaining_cox(*trace.curve, begin, end, config.confidence, config.cox_grid)
                           : estimate_remaining_ip(*trace.curve, begin, end, config.confidence);
    } catch (const NumericError& e) {
      trace.gate = Gate::FitFailed;
      trace.fit_error = e.what();
      out.traces.push_back(std::move(trace));
      continue;
    }
    trace.gate = Gate::Evaluated;
    const double remaining = config.remaining_statistic == RemainingStatistic::UpperBound
                                 ? static_cast<double>(trace.estimate->upper_bound)
                                 : trace.estimate->lambda_mass;
    const double r_hat = static_cast<double>(trace.rel_found) + remaining;
    trace.r_hat = r_hat;
    const double needed = config.target_recall * r_hat;
    trace.stop_decision = config.stop_rule == StopRule::Ceiling
                              ? trace.rel_found >= tolerant_ceil(needed)
                              : needed < static_cast<double>(trace.rel_found);
    const bool stop = trace.stop_decision;
    out.traces.push_back(std::move(trace));
    if (stop) {
      out.stop_rank = k;
      out.docs_examined = k;
      out.rel_found = topic.relevant_in_prefix(k);
      return out;
    }
  }

  out.stop_rank = n;
  out.docs_examined = n;
  out.rel_found = topic.total_relevant();
  out.hit_end = true;
  return out;
}

} // namespace tarstop
