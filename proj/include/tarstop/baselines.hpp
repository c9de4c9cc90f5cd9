#pragma once

#include <cstdint>

#include "tarstop/corpus_io.hpp"
#include "tarstop/stopping_engine.hpp"

namespace tarstop {

/// Hindsight stop at the rank of the ceil(l R)-th relevant document; rank 1
/// when the topic has no relevant documents.
StoppingOutcome oracle_stop(const RankedTopic& topic, double target_recall);

/// ceil(-log(1 - c) / (1 - l)): relevant documents a uniform random sample
/// must contain for recall >= l with probability c. Throws DomainError for
/// l >= 1 (use 0.99 instead) and for c outside (0, 1).
std::int64_t adapted_target_size(double target_recall, double confidence);

struct TargetConfig {
  std::int64_t target_size = 10;
  std::uint64_t seed = 0;
};

/// Samples ranks uniformly without replacement until target_size relevant
/// documents are found, then screens the ranking down to the deepest of them.
/// docs_examined counts each document once (sample union prefix).
StoppingOutcome target_stop(const RankedTopic& topic, const TargetConfig& config);

struct KneeConfig {
  double rho_threshold = 6.0;
  double alpha = 0.025;
  double beta = 0.025;
  BatchSchedule batch_schedule = BatchSchedule::UniformFraction;
};

struct KneePoint {
  std::int64_t rank = 0; ///< r*, 0 when no knee exists
  double slope_ratio = 0.0;
};

/// Knee of the gain curve over ranks 1..labels.size(): the rank maximising
/// the normalised distance above the chord from the origin to the end point,
/// with slope ratio [g(r)/r] / [(g(k) - g(r) + 1) / (k - r)].
KneePoint detect_knee(std::span<const std::uint8_t> labels);

/// Stops at the first checkpoint whose knee slope ratio reaches rho_threshold.
StoppingOutcome knee_stop(const RankedTopic& topic, const KneeConfig& config);

} // namespace tarstop
