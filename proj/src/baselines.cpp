#include "tarstop/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tarstop/error.hpp"
#include "tarstop/random.hpp"

namespace tarstop {

StoppingOutcome oracle_stop(const RankedTopic& topic, double target_recall) {
  if (!(target_recall > 0.0 && target_recall <= 1.0)) throw ConfigError("target recall must lie in (0, 1]");
  StoppingOutcome out;
  out.method = "oracle";
  out.topic_id = topic.topic_id();
  const std::int64_t total = topic.total_relevant();
  if (total == 0) {
    out.stop_rank = 1;
    out.docs_examined = 1;
    return out;
  }
  const std::int64_t needed =
      std::clamp<std::int64_t>(tolerant_ceil(target_recall * static_cast<double>(total)), 1, total);
  std::int64_t found = 0;
  for (std::int64_t r = 1; r <= topic.n(); ++r) {
    if (topic.relevant_at(r) && ++found == needed) {
      out.stop_rank = r;
      break;
    }
  }
  out.docs_examined = out.stop_rank;
  out.rel_found = needed;
  return out;
}

std::int64_t adapted_target_size(double target_recall, double confidence) {
  if (!(target_recall < 1.0)) {
    throw DomainError("adapted target size diverges for target recall >= 1; use 0.99 instead");
  }
  if (!(target_recall > 0.0)) throw DomainError("target recall must be > 0");
  if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("confidence must lie in (0, 1)");
  return std::max<std::int64_t>(1, tolerant_ceil(-std::log(1.0 - confidence) / (1.0 - target_recall)));
}

StoppingOutcome target_stop(const RankedTopic& topic, const TargetConfig& config) {
  if (config.target_size < 1) throw ConfigError("target size must be >= 1");
  StoppingOutcome out;
  out.method = "target";
  out.topic_id = topic.topic_id();
  const std::int64_t n = topic.n();
  if (topic.total_relevant() < config.target_size) {
    out.stop_rank = n;
    out.docs_examined = n;
    out.rel_found = topic.total_relevant();
    out.hit_end = true;
    return out;
  }

  // Incremental Fisher-Yates: order[0..drawn) is the sample so far.
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::int64_t{1});
  Rng rng(config.seed);
  std::int64_t found = 0;
  std::int64_t deepest = 0;
  std::size_t drawn = 0;
  while (found < config.target_size) {
    const std::size_t pick = drawn + static_cast<std::size_t>(rng.below(order.size() - drawn));
    std::swap(order[drawn], order[pick]);
    const std::int64_t rank = order[drawn++];
    if (topic.relevant_at(rank)) {
      ++found;
      deepest = std::max(deepest, rank);
    }
  }
  const auto beyond = std::count_if(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(drawn),
                                    [deepest](std::int64_t r) { return r > deepest; });
  out.stop_rank = deepest;
  out.docs_examined = deepest + beyond;
  out.rel_found = topic.relevant_in_prefix(deepest);
  return out;
}

KneePoint detect_knee(std::span<const std::uint8_t> labels) {
  const auto k = static_cast<std::int64_t>(labels.size());
  std::vector<std::int64_t> gain(labels.size() + 1, 0);
  for (std::size_t r = 0; r < labels.size(); ++r) gain[r + 1] = gain[r] + (labels[r] != 0);
  const std::int64_t total = gain.back();
  if (k == 0 || total == 0) return {};

  std::int64_t best = 1;
  double best_distance = -INFINITY;
  for (std::int64_t r = 1; r <= k; ++r) {
    const double distance = static_cast<double>(gain[static_cast<std::size_t>(r)]) / static_cast<double>(total) -
                            static_cast<double>(r) / static_cast<double>(k);
    if (distance > best_distance) {
      best_distance = distance;
      best = r;
    }
  }
  KneePoint knee;
  knee.rank = best;
  if (best == k) return knee;
  const double g = static_cast<double>(gain[static_cast<std::size_t>(best)]);
  const double before = g / static_cast<double>(best);
  const double after = (static_cast<double>(total) - g + 1.0) / static_cast<double>(k - best);
  knee.slope_ratio = before / after;
  return knee;
}

StoppingOutcome knee_stop(const RankedTopic& topic, const KneeConfig& config) {
  if (!(config.rho_threshold > 0.0)) throw ConfigError("knee slope-ratio threshold must be > 0");
  StoppingOutcome out;
  out.method = "knee";
  out.topic_id = topic.topic_id();
  for (const std::int64_t k : checkpoints(topic.n(), config.alpha, config.beta, config.batch_schedule)) {
    const KneePoint knee = detect_knee(topic.labels().first(static_cast<std::size_t>(k)));
    if (knee.rank > 0 && knee.slope_ratio >= config.rho_threshold) {
      out.stop_rank = k;
      out.docs_examined = k;
      out.rel_found = topic.relevant_in_prefix(k);
      return out;
    }
  }
  out.stop_rank = topic.n();
  out.docs_examined = topic.n();
  out.rel_found = topic.total_relevant();
  out.hit_end = true;
  return out;
}

} // namespace tarstop
