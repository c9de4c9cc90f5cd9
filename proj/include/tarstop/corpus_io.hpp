#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tarstop {

/// Binary relevance judgments keyed by (topic, doc).
class Qrels {
public:
  using DocMap = std::map<std::string, int, std::less<>>;
  using TopicMap = std::map<std::string, DocMap, std::less<>>;

  /// Throws DuplicateEntryError if the key is already present.
  void add(std::string topic, std::string doc, int relevance);
  std::optional<int> find(std::string_view topic, std::string_view doc) const;

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }
  const TopicMap& topics() const noexcept { return topics_; }

private:
  TopicMap topics_;
  std::size_t size_ = 0;
};

struct RunEntry {
  std::string doc_id;
  std::int64_t rank = 0;
  double score = 0.0;

  bool operator==(const RunEntry&) const = default;
};

/// Per-topic document rankings, ranks renumbered 1..m in rank order.
struct RunRanking {
  std::map<std::string, std::vector<RunEntry>> topics;

  bool empty() const noexcept { return topics.empty(); }
};

/// One topic's ranked list with binary labels indexed by rank - 1.
class RankedTopic {
public:
  /// Throws ArgumentError when labels is empty.
  RankedTopic(std::string topic_id, std::vector<std::uint8_t> labels);

  const std::string& topic_id() const noexcept { return topic_id_; }
  std::int64_t n() const noexcept { return static_cast<std::int64_t>(labels_.size()); }
  std::int64_t total_relevant() const noexcept { return relevant_; }
  std::span<const std::uint8_t> labels() const noexcept { return labels_; }
  bool relevant_at(std::int64_t rank) const { return labels_.at(static_cast<std::size_t>(rank - 1)) != 0; }
  /// Relevant documents in ranks 1..k.
  std::int64_t relevant_in_prefix(std::int64_t k) const;

private:
  std::string topic_id_;
  std::vector<std::uint8_t> labels_;
  std::vector<std::int64_t> prefix_; // prefix_[k] = relevant in ranks 1..k
  std::int64_t relevant_ = 0;
};

/// `topic iter doc rel` per line; `#` comments and blank lines skipped.
/// Graded relevance > 0 maps to 1.
Qrels parse_qrels(std::istream& in, const std::string& source = "<qrels>");
Qrels parse_qrels_text(std::string_view text, const std::string& source = "<qrels>");

/// `topic Q0 doc rank score tag` per line.
RunRanking parse_run(std::istream& in, const std::string& source = "<run>");
RunRanking parse_run_text(std::string_view text, const std::string& source = "<run>");

Qrels load_qrels(const std::string& path);
RunRanking load_run(const std::string& path);

/// TREC run text, one line per entry, topics in key order.
std::string serialize_run(const RunRanking& run, std::string_view tag = "tarstop");
std::string serialize_qrels(const Qrels& qrels);

/// Labels each ranked doc from qrels; unjudged docs count as non-relevant.
/// Throws NotFoundError when the topic is not in the run.
RankedTopic join(const RunRanking& run, const Qrels& qrels, const std::string& topic_id);
std::vector<RankedTopic> join_all(const RunRanking& run, const Qrels& qrels);

/// Rankings with known ground truth, sampled from a rate function.
enum class GeneratorKind { Exponential, Hyperbolic, PowerLaw, APPrior, Uniform };

std::string_view to_string(GeneratorKind kind);
/// Throws ValidationError naming field "kind" on unknown names.
GeneratorKind parse_generator_kind(std::string_view name);

struct SyntheticSpec {
  std::string topic_id = "S0";
  std::int64_t n = 1000;
  GeneratorKind kind = GeneratorKind::Uniform;
  double a = 0.05;
  double b = 0.0;
  double c = 0.0;
  std::uint64_t seed = 0;
  double noise = 0.0;
};

/// Throws ValidationError naming the offending field.
void validate(const SyntheticSpec& spec);

/// Label at rank x ~ Bernoulli(clamp(lambda(x), 0, 1)), then flipped with
/// probability noise. Deterministic for a fixed spec.
RankedTopic generate_synthetic(const SyntheticSpec& spec);

/// Accepts a single object, an array of objects, or {"topics": [...]}.
/// Keys: topic (optional), n, kind, params.{a,b,c}, seed, noise.
std::vector<SyntheticSpec> parse_synthetic_specs(std::string_view json_text, const std::string& source = "<spec>");
std::vector<SyntheticSpec> load_synthetic_specs(const std::string& path);
std::string serialize_synthetic_specs(std::span<const SyntheticSpec> specs);

/// A run ranking and qrels for generated topics; doc ids are `<topic>-d<rank>`.
std::pair<RunRanking, Qrels> export_topics(std::span<const RankedTopic> topics);

} // namespace tarstop
