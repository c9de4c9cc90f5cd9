#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tarstop/corpus_io.hpp"
#include "tarstop/stopping_engine.hpp"

namespace tarstop {

/// Per-topic scores. loss_e uses the effort constants a = 1, b = 100.
struct TopicMetrics {
  double recall = 0.0;
  double cost = 0.0;
  bool hit_target = false;
  double relative_error = 0.0;
  double loss_r = 0.0;
  double loss_e = 0.0;
  double loss_er = 0.0;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0; ///< population standard deviation
};

struct CollectionMetrics {
  std::size_t topics = 0;
  MeanStd recall;
  MeanStd cost;
  MeanStd relative_error;
  MeanStd loss_r;
  MeanStd loss_e;
  MeanStd loss_er;
  double reliability = 0.0;
};

/// recall = r/R (1 when R = 0), cost = o/n, RE = |recall - l|/l,
/// loss_r = (1 - recall)^2, loss_e = (100/n)^2 (o/(R + 100))^2.
TopicMetrics topic_metrics(const StoppingOutcome& outcome, const RankedTopic& topic, double target_recall);

/// Throws ArgumentError on an empty list.
CollectionMetrics aggregate(std::span<const TopicMetrics> topics);

MeanStd mean_std(std::span<const double> values);

/// (predicted - actual) / actual; throws ArgumentError when actual < 1.
double remaining_error(double predicted, std::int64_t actual);

/// Mean of remaining_error over the outcome's evaluated checkpoints, with the
/// confidence upper bound as the prediction. Checkpoints with nothing left to
/// find are skipped; nullopt when none remain.
std::optional<double> mean_remaining_error(const StoppingOutcome& outcome, const RankedTopic& topic);

/// Area under the cumulative-recall curve rescaled to [0, 1]: 1 when every
/// relevant document precedes every non-relevant one, 0 for the reverse.
/// 0 when the topic has no relevant documents.
double ranking_effectiveness(const RankedTopic& topic);

} // namespace tarstop
