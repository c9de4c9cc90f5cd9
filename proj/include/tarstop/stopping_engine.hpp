#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tarstop/corpus_io.hpp"
#include "tarstop/point_process.hpp"
#include "tarstop/rate_models.hpp"

namespace tarstop {

/// Minimum relevant documents before a rate function is fitted.
struct MinRelevantRule {
  enum class Kind { Static, Dynamic };
  Kind kind = Kind::Dynamic;
  std::int64_t threshold = 20; ///< Static only

  static MinRelevantRule fixed(std::int64_t t) { return {Kind::Static, t}; }
  static MinRelevantRule dynamic() { return {Kind::Dynamic, 0}; }

  /// Static: rel >= threshold. Dynamic: rel >= 20 (1 - k/n), in real arithmetic.
  bool satisfied(std::int64_t rel, std::int64_t k, std::int64_t n) const;
  bool operator==(const MinRelevantRule&) const = default;
};

/// "static10", "static20", "dynamic" (any "static<N>" is accepted).
std::string to_string(const MinRelevantRule& rule);
MinRelevantRule parse_min_relevant_rule(std::string_view name);

enum class BatchSchedule { UniformFraction, AutoTar };
std::string_view short_name(BatchSchedule schedule);
BatchSchedule parse_batch_schedule(std::string_view name);

/// How the stop test compares found documents with the estimated total.
enum class StopRule {
  Ceiling,   ///< rel(1,k) >= ceil(l * R_hat)
  StrictLess ///< l * R_hat < rel(1,k), the pseudocode form
};

/// Which statistic of the remaining-count distribution enters R_hat.
enum class RemainingStatistic { UpperBound, Mean };

struct StoppingConfig {
  double target_recall = 0.9;
  double confidence = 0.95;
  double alpha = 0.025;
  double beta = 0.025;
  ProcessKind process = ProcessKind::InhomogeneousPoisson;
  RateKind rate_kind = RateKind::Hyperbolic;
  double nrmse_threshold = 0.1;
  MinRelevantRule min_rel = MinRelevantRule::dynamic();
  std::size_t window_size = 25;
  BatchSchedule batch_schedule = BatchSchedule::UniformFraction;
  int cox_grid = 9;
  StopRule stop_rule = StopRule::Ceiling;
  RemainingStatistic remaining_statistic = RemainingStatistic::UpperBound;

  /// Throws ConfigError naming the offending setting.
  void validate() const;
};

StoppingConfig default_config();

/// ceil() that ignores floating-point noise just above an integer, so that
/// e.g. 0.9 * 10 yields 9.
std::int64_t tolerant_ceil(double x);

/// Ranks k < n at which the stop test is evaluated. UniformFraction starts at
/// ceil(alpha n) and advances by ceil(beta n); AutoTar accumulates batches
/// B = 1, B += ceil(B / 10), keeping only checkpoints with k >= ceil(alpha n).
std::vector<std::int64_t> checkpoints(std::int64_t n, double alpha, double beta, BatchSchedule schedule);

enum class Gate { TooFewRelevant, FitFailed, NrmseRejected, Evaluated };
std::string_view to_string(Gate gate);

struct IterationTrace {
  std::int64_t k = 0;
  std::int64_t rel_found = 0;
  Gate gate = Gate::TooFewRelevant;
  std::optional<RateCurve> curve;
  std::optional<RemainingEstimate> estimate;
  std::optional<double> r_hat;
  bool stop_decision = false;
  std::string fit_error; ///< set when gate == FitFailed
};

struct StoppingOutcome {
  std::string method;
  std::string topic_id;
  std::int64_t stop_rank = 0;
  std::int64_t docs_examined = 0;
  std::int64_t rel_found = 0;
  std::vector<IterationTrace> traces;
  bool hit_end = false;

  /// Evaluated checkpoints where the Cox estimate fell back to IP.
  std::size_t cox_fallbacks() const;
};

/// Method label such as "ip-hyp" or "cox-exp".
std::string method_label(const StoppingConfig& config);

/// Screens the ranking in batches, fitting the rate function and estimating
/// the remaining relevant documents at every checkpoint, and stops once
/// enough relevant documents have been found for the target recall. Fitting
/// problems are recorded in the trace; only configuration errors throw.
StoppingOutcome run_stopping(const RankedTopic& topic, const StoppingConfig& config);

} // namespace tarstop
