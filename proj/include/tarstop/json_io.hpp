#pragma once

#include <json.hpp>

#include "tarstop/eval_metrics.hpp"
#include "tarstop/point_process.hpp"
#include "tarstop/rate_models.hpp"
#include "tarstop/stopping_engine.hpp"

// JSON records mirroring the domain types. Non-finite numbers (singular
// variance sentinels) serialise as null.

namespace tarstop {

void to_json(nlohmann::json& j, const RateParams& p);
void to_json(nlohmann::json& j, const RateCurve& c);
void to_json(nlohmann::json& j, const RemainingEstimate& e);
void to_json(nlohmann::json& j, const IterationTrace& t);
void to_json(nlohmann::json& j, const TopicMetrics& m);
void to_json(nlohmann::json& j, const CollectionMetrics& m);
void to_json(nlohmann::json& j, const StoppingConfig& c);

/// Outcome summary; traces are included only when with_traces is set.
nlohmann::json outcome_json(const StoppingOutcome& o, bool with_traces);

} // namespace tarstop
