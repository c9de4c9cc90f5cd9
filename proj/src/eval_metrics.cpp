#include "tarstop/eval_metrics.hpp"

#include <cmath>

#include "tarstop/error.hpp"

namespace tarstop {

TopicMetrics topic_metrics(const StoppingOutcome& outcome, const RankedTopic& topic, double target_recall) {
  const double total = static_cast<double>(topic.total_relevant());
  const double n = static_cast<double>(topic.n());
  const double examined = static_cast<double>(outcome.docs_examined);
  TopicMetrics m;
  m.recall = topic.total_relevant() == 0 ? 1.0 : static_cast<double>(outcome.rel_found) / total;
  m.cost = examined / n;
  m.hit_target = m.recall >= target_recall - 1e-12;
  m.relative_error = std::abs(m.recall - target_recall) / target_recall;
  m.loss_r = (1.0 - m.recall) * (1.0 - m.recall);
  const double weight = 100.0 / n;
  const double effort = examined / (total + 100.0);
  m.loss_e = weight * weight * effort * effort;
  m.loss_er = m.loss_r + m.loss_e;
  return m;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("mean of an empty list");
  // Neumaier summation keeps the result independent of magnitude ordering
  // to within an ulp.
  auto sum = [&](auto term) {
    double s = 0.0, comp = 0.0;
    for (double v : values) {
      const double x = term(v);
      const double t = s + x;
      comp += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
      s = t;
    }
    return s + comp;
  };
  const double count = static_cast<double>(values.size());
  MeanStd out;
  out.mean = sum([](double v) { return v; }) / count;
  const double mu = out.mean;
  out.std = std::sqrt(sum([mu](double v) { return (v - mu) * (v - mu); }) / count);
  return out;
}

CollectionMetrics aggregate(std::span<const TopicMetrics> topics) {
  if (topics.empty()) throw ArgumentError("cannot aggregate an empty topic list");
  auto column = [&](auto field) {
    std::vector<double> v;
    v.reserve(topics.size());
    for (const auto& t : topics) v.push_back(t.*field);
    return mean_std(v);
  };
  CollectionMetrics c;
  c.topics = topics.size();
  c.recall = column(&TopicMetrics::recall);
  c.cost = column(&TopicMetrics::cost);
  c.relative_error = column(&TopicMetrics::relative_error);
  c.loss_r = column(&TopicMetrics::loss_r);
  c.loss_e = column(&TopicMetrics::loss_e);
  c.loss_er = column(&TopicMetrics::loss_er);
  std::size_t hits = 0;
  for (const auto& t : topics) hits += t.hit_target;
  c.reliability = static_cast<double>(hits) / static_cast<double>(topics.size());
  return c;
}

double remaining_error(double predicted, std::int64_t actual) {
  if (actual < 1) throw ArgumentError("remaining_error is undefined when nothing remains");
  return (predicted - static_cast<double>(actual)) / static_cast<double>(actual);
}

std::optional<double> mean_remaining_error(const StoppingOutcome& outcome, const RankedTopic& topic) {
  std::vector<double> errors;
  for (const auto& t : outcome.traces) {
    if (t.gate != Gate::Evaluated || !t.estimate) continue;
    const std::int64_t actual = topic.total_relevant() - t.rel_found;
    if (actual < 1) continue;
    errors.push_back(remaining_error(static_cast<double>(t.estimate->upper_bound), actual));
  }
  if (errors.empty()) return std::nullopt;
  return mean_std(errors).mean;
}

double ranking_effectiveness(const RankedTopic& topic) {
  const std::int64_t n = topic.n();
  const std::int64_t total = topic.total_relevant();
  if (total == 0) return 0.0;
  if (total == n) return 1.0;
  double area = 0.0, best = 0.0, worst = 0.0;
  for (std::int64_t r = 1; r <= n; ++r) {
    area += static_cast<double>(topic.relevant_in_prefix(r));
    best += static_cast<double>(std::min(r, total));
    worst += static_cast<double>(std::max<std::int64_t>(0, r - (n - total)));
  }
  return (area - worst) / (best - worst);
}

} // namespace tarstop
