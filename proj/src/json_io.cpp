#include "tarstop/json_io.hpp"

#include <cmath>

namespace tarstop {

using nlohmann::json;

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json mean_std_json(const MeanStd& m) { return {{"mean", number(m.mean)}, {"std", number(m.std)}}; }

} // namespace

void to_json(json& j, const RateParams& p) {
  j = {{"kind", std::string(long_name(p.kind))}, {"a", number(p.a)}};
  if (p.kind == RateKind::Exponential || p.kind == RateKind::PowerLaw || p.kind == RateKind::Hyperbolic) {
    j["b"] = number(p.b);
  }
  if (p.kind == RateKind::Hyperbolic) j["c"] = number(p.c);
  if (p.kind == RateKind::APPrior) j["n_total"] = p.n_total;
}

void to_json(json& j, const RateCurve& c) {
  json variances = json::array();
  for (double v : c.param_variance) variances.push_back(number(v));
  j = {{"params", c.params},
       {"param_variance", variances},
       {"nrmse", number(c.nrmse)},
       {"points_used", c.points_used}};
}

void to_json(json& j, const RemainingEstimate& e) {
  j = {{"interval", {number(e.interval_begin), number(e.interval_end)}},
       {"lambda_mass", number(e.lambda_mass)},
       {"upper_bound", e.upper_bound},
       {"confidence", number(e.confidence)},
       {"process", std::string(short_name(e.process))},
       {"cox_fallback", e.cox_fallback}};
}

void to_json(json& j, const IterationTrace& t) {
  j = {{"k", t.k},
       {"rel_found", t.rel_found},
       {"gate", std::string(to_string(t.gate))},
       {"stop", t.stop_decision}};
  j["curve"] = t.curve ? json(*t.curve) : json(nullptr);
  j["estimate"] = t.estimate ? json(*t.estimate) : json(nullptr);
  j["r_hat"] = t.r_hat ? number(*t.r_hat) : json(nullptr);
  if (!t.fit_error.empty()) j["fit_error"] = t.fit_error;
}

void to_json(json& j, const TopicMetrics& m) {
  j = {{"recall", number(m.recall)},   {"cost", number(m.cost)},       {"hit_target", m.hit_target},
       {"RE", number(m.relative_error)}, {"loss_r", number(m.loss_r)}, {"loss_e", number(m.loss_e)},
       {"loss_er", number(m.loss_er)}};
}

void to_json(json& j, const CollectionMetrics& m) {
  j = {{"topics", m.topics},
       {"recall", mean_std_json(m.recall)},
       {"cost", mean_std_json(m.cost)},
       {"reliability", number(m.reliability)},
       {"RE", mean_std_json(m.relative_error)},
       {"loss_r", mean_std_json(m.loss_r)},
       {"loss_e", mean_std_json(m.loss_e)},
       {"loss_er", mean_std_json(m.loss_er)}};
}

void to_json(json& j, const StoppingConfig& c) {
  j = {{"target_recall", c.target_recall},
       {"confidence", c.confidence},
       {"alpha", c.alpha},
       {"beta", c.beta},
       {"process", std::string(short_name(c.process))},
       {"rate", std::string(short_name(c.rate_kind))},
       {"nrmse_threshold", c.nrmse_threshold},
       {"min_rel", to_string(c.min_rel)},
       {"window", c.window_size},
       {"batch", std::string(short_name(c.batch_schedule))},
       {"cox_grid", c.cox_grid},
       {"stop_rule", c.stop_rule == StopRule::Ceiling ? "ceil" : "strict"},
       {"estimate", c.remaining_statistic == RemainingStatistic::UpperBound ? "upper" : "mean"}};
}

json outcome_json(const StoppingOutcome& o, bool with_traces) {
  json j = {{"method", o.method},
            {"topic", o.topic_id},
            {"stop_rank", o.stop_rank},
            {"docs_examined", o.docs_examined},
            {"rel_found", o.rel_found},
            {"hit_end", o.hit_end},
            {"checkpoints", o.traces.size()},
            {"cox_fallbacks", o.cox_fallbacks()}};
  if (with_traces) j["traces"] = o.traces;
  return j;
}

} // namespace tarstop
