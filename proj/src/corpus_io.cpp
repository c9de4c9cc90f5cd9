#include "tarstop/corpus_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "tarstop/error.hpp"
#include "tarstop/random.hpp"
#include "tarstop/rate_models.hpp"

namespace tarstop {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end]))) ++end;
    out.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

bool skip_line(const std::vector<std::string_view>& fields) {
  return fields.empty() || fields.front().front() == '#';
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

} // namespace

// ---------------------------------------------------------------------------
// Qrels / RankedTopic
// ---------------------------------------------------------------------------

void Qrels::add(std::string topic, std::string doc, int relevance) {
  auto& docs = topics_[topic];
  if (docs.contains(doc)) {
    throw DuplicateEntryError("duplicate qrels entry for topic '" + topic + "' doc '" + doc + "'");
  }
  docs.emplace(std::move(doc), relevance > 0 ? 1 : 0);
  ++size_;
}

std::optional<int> Qrels::find(std::string_view topic, std::string_view doc) const {
  const auto t = topics_.find(topic);
  if (t == topics_.end()) return std::nullopt;
  const auto d = t->second.find(doc);
  if (d == t->second.end()) return std::nullopt;
  return d->second;
}

RankedTopic::RankedTopic(std::string topic_id, std::vector<std::uint8_t> labels)
    : topic_id_(std::move(topic_id)), labels_(std::move(labels)) {
  if (labels_.empty()) throw ArgumentError("topic '" + topic_id_ + "' has no documents");
  prefix_.resize(labels_.size() + 1, 0);
  for (std::size_t r = 0; r < labels_.size(); ++r) {
    labels_[r] = labels_[r] != 0 ? 1 : 0;
    prefix_[r + 1] = prefix_[r] + labels_[r];
  }
  relevant_ = prefix_.back();
}

std::int64_t RankedTopic::relevant_in_prefix(std::int64_t k) const {
  k = std::clamp<std::int64_t>(k, 0, n());
  return prefix_[static_cast<std::size_t>(k)];
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

Qrels parse_qrels(std::istream& in, const std::string& source) {
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto f = split_fields(line);
    if (skip_line(f)) continue;
    if (f.size() != 4) {
      throw ParseError(source, line_no, "expected 4 fields (topic iter doc rel), found " +
                                            std::to_string(f.size()));
    }
    int rel = 0;
    if (!parse_number(f[3], rel)) {
      throw ParseError(source, line_no, "relevance '" + std::string(f[3]) + "' is not an integer");
    }
    try {
      qrels.add(std::string(f[0]), std::string(f[2]), rel);
    } catch (const DuplicateEntryError& e) {
      throw DuplicateEntryError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return qrels;
}

Qrels parse_qrels_text(std::string_view text, const std::string& source) {
  std::istringstream in{std::string(text)};
  return parse_qrels(in, source);
}

RunRanking parse_run(std::istream& in, const std::string& source) {
  RunRanking run;
  std::map<std::string, std::unordered_set<std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto f = split_fields(line);
    if (skip_line(f)) continue;
    if (f.size() != 6) {
      throw ParseError(source, line_no, "expected 6 fields (topic Q0 doc rank score tag), found " +
                                            std::to_string(f.size()));
    }
    RunEntry entry;
    entry.doc_id = std::string(f[2]);
    if (!parse_number(f[3], entry.rank)) {
      throw ParseError(source, line_no, "rank '" + std::string(f[3]) + "' is not an integer");
    }
    if (!parse_number(f[4], entry.score)) {
      throw ParseError(source, line_no, "score '" + std::string(f[4]) + "' is not a number");
    }
    std::string topic(f[0]);
    if (!seen[topic].insert(entry.doc_id).second) {
      throw DuplicateEntryError(source + ":" + std::to_string(line_no) + ": duplicate doc '" +
                                entry.doc_id + "' in topic '" + topic + "'");
    }
    run.topics[topic].push_back(std::move(entry));
  }
  for (auto& [topic, entries] : run.topics) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const RunEntry& l, const RunEntry& r) { return l.rank < r.rank; });
    for (std::size_t k = 0; k < entries.size(); ++k) entries[k].rank = static_cast<std::int64_t>(k + 1);
  }
  return run;
}

RunRanking parse_run_text(std::string_view text, const std::string& source) {
  std::istringstream in{std::string(text)};
  return parse_run(in, source);
}

Qrels load_qrels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open qrels file '" + path + "'");
  return parse_qrels(in, path);
}

RunRanking load_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open run file '" + path + "'");
  return parse_run(in, path);
}

std::string serialize_run(const RunRanking& run, std::string_view tag) {
  std::ostringstream out;
  char score[64];
  for (const auto& [topic, entries] : run.topics) {
    for (const auto& e : entries) {
      std::snprintf(score, sizeof score, "%.17g", e.score);
      out << topic << " Q0 " << e.doc_id << ' ' << e.rank << ' ' << score << ' ' << tag << '\n';
    }
  }
  return out.str();
}

std::string serialize_qrels(const Qrels& qrels) {
  std::ostringstream out;
  for (const auto& [topic, docs] : qrels.topics()) {
    for (const auto& [doc, rel] : docs) out << topic << " 0 " << doc << ' ' << rel << '\n';
  }
  return out.str();
}

RankedTopic join(const RunRanking& run, const Qrels& qrels, const std::string& topic_id) {
  const auto it = run.topics.find(topic_id);
  if (it == run.topics.end() || it->second.empty()) {
    throw NotFoundError("topic '" + topic_id + "' not present in run");
  }
  std::vector<std::uint8_t> labels;
  labels.reserve(it->second.size());
  for (const auto& e : it->second) labels.push_back(qrels.find(topic_id, e.doc_id).value_or(0) > 0 ? 1 : 0);
  return RankedTopic(topic_id, std::move(labels));
}

std::vector<RankedTopic> join_all(const RunRanking& run, const Qrels& qrels) {
  std::vector<RankedTopic> out;
  out.reserve(run.topics.size());
  for (const auto& [topic, entries] : run.topics) {
    if (!entries.empty()) out.push_back(join(run, qrels, topic));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic rankings
// ---------------------------------------------------------------------------

std::string_view to_string(GeneratorKind kind) {
  switch (kind) {
  case GeneratorKind::Exponential: return "exponential";
  case GeneratorKind::Hyperbolic: return "hyperbolic";
  case GeneratorKind::PowerLaw: return "power";
  case GeneratorKind::APPrior: return "ap_prior";
  case GeneratorKind::Uniform: return "uniform";
  }
  return "?";
}

GeneratorKind parse_generator_kind(std::string_view name) {
  if (name == "uniform") return GeneratorKind::Uniform;
  try {
    switch (parse_rate_kind(name)) {
    case RateKind::Exponential: return GeneratorKind::Exponential;
    case RateKind::Hyperbolic: return GeneratorKind::Hyperbolic;
    case RateKind::PowerLaw: return GeneratorKind::PowerLaw;
    case RateKind::APPrior: return GeneratorKind::APPrior;
    }
  } catch (const ConfigError&) {
  }
  throw ValidationError("kind", "unknown generator kind '" + std::string(name) +
                                    "' (expected exponential, hyperbolic, power, ap_prior or uniform)");
}

namespace {

RateParams generator_params(const SyntheticSpec& s) {
  switch (s.kind) {
  case GeneratorKind::Exponential: return RateParams::exponential(s.a, s.b);
  case GeneratorKind::Hyperbolic: return RateParams::hyperbolic(s.a, s.b, s.c);
  case GeneratorKind::PowerLaw: return RateParams::power_law(s.a, s.b);
  case GeneratorKind::APPrior: return RateParams::ap_prior(s.a, s.n);
  case GeneratorKind::Uniform: break;
  }
  return {};
}

} // namespace

void validate(const SyntheticSpec& s) {
  if (s.n < 1) throw ValidationError("n", "collection size must be >= 1");
  if (!(s.noise >= 0.0 && s.noise < 0.5)) throw ValidationError("noise", "flip probability must lie in [0, 0.5)");
  if (!std::isfinite(s.a)) throw ValidationError("params.a", "must be finite");
  switch (s.kind) {
  case GeneratorKind::Uniform:
    if (!(s.a >= 0.0 && s.a <= 1.0)) throw ValidationError("params.a", "uniform rate must lie in [0, 1]");
    return;
  case GeneratorKind::Hyperbolic:
    if (!(s.b >= 0.0 && s.b <= 1.0)) throw ValidationError("params.b", "hyperbolic b must lie in [0, 1]");
    if (!(s.c > 0.0) || !std::isfinite(s.c)) throw ValidationError("params.c", "hyperbolic c must be > 0");
    break;
  case GeneratorKind::APPrior:
    if (s.n < 2) throw ValidationError("n", "AP-Prior generator needs n >= 2");
    break;
  case GeneratorKind::Exponential:
  case GeneratorKind::PowerLaw:
    if (!std::isfinite(s.b)) throw ValidationError("params.b", "must be finite");
    break;
  }
  if (!(s.a > 0.0)) throw ValidationError("params.a", "must be > 0");
}

RankedTopic generate_synthetic(const SyntheticSpec& s) {
  validate(s);
  Rng rng(s.seed);
  const RateParams params = generator_params(s);
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(s.n));
  for (std::int64_t x = 1; x <= s.n; ++x) {
    const double rate = s.kind == GeneratorKind::Uniform ? s.a : rate_value(params, static_cast<double>(x));
    const double p = std::clamp(rate, 0.0, 1.0);
    bool rel = rng.uniform() < p;
    if (s.noise > 0.0 && rng.uniform() < s.noise) rel = !rel;
    labels[static_cast<std::size_t>(x - 1)] = rel ? 1 : 0;
  }
  return RankedTopic(s.topic_id, std::move(labels));
}

namespace {

using nlohmann::json;

double number_field(const json& obj, const char* key, const std::string& field, double fallback,
                    bool required) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    if (required) throw ValidationError(field, "required field missing");
    return fallback;
  }
  if (!it->is_number()) throw ValidationError(field, "must be a number");
  return it->get<double>();
}

SyntheticSpec spec_from_json(const json& obj, std::size_t index) {
  if (!obj.is_object()) throw ValidationError("topics[" + std::to_string(index) + "]", "must be an object");
  SyntheticSpec s;
  char id[32];
  std::snprintf(id, sizeof id, "S%03zu", index + 1);
  s.topic_id = id;
  if (const auto it = obj.find("topic"); it != obj.end()) {
    if (!it->is_string() || it->get<std::string>().empty()) throw ValidationError("topic", "must be a non-empty string");
    s.topic_id = it->get<std::string>();
  }
  const auto n = obj.find("n");
  if (n == obj.end()) throw ValidationError("n", "required field missing");
  if (!n->is_number_integer()) throw ValidationError("n", "must be an integer");
  s.n = n->get<std::int64_t>();
  const auto kind = obj.find("kind");
  if (kind == obj.end() || !kind->is_string()) throw ValidationError("kind", "required string field");
  s.kind = parse_generator_kind(kind->get<std::string>());
  const json empty = json::object();
  const auto pit = obj.find("params");
  if (pit != obj.end() && !pit->is_object()) throw ValidationError("params", "must be an object");
  const json& params = pit == obj.end() ? empty : *pit;
  s.a = number_field(params, "a", "params.a", 0.0, true);
  const bool needs_b = s.kind != GeneratorKind::Uniform && s.kind != GeneratorKind::APPrior;
  s.b = number_field(params, "b", "params.b", 0.0, needs_b);
  s.c = number_field(params, "c", "params.c", 0.0, s.kind == GeneratorKind::Hyperbolic);
  s.noise = number_field(obj, "noise", "noise", 0.0, false);
  if (const auto it = obj.find("seed"); it != obj.end()) {
    if (!it->is_number_integer()) throw ValidationError("seed", "must be an integer");
    s.seed = it->is_number_unsigned() ? it->get<std::uint64_t>()
                                      : static_cast<std::uint64_t>(it->get<std::int64_t>());
  } else {
    s.seed = derive_seed(0, s.topic_id);
  }
  validate(s);
  return s;
}

} // namespace

std::vector<SyntheticSpec> parse_synthetic_specs(std::string_view text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto end = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(end), '\n'));
    throw ParseError(source, line, "invalid JSON");
  }
  const json* list = &doc;
  if (doc.is_object() && doc.contains("topics")) list = &doc["topics"];
  std::vector<SyntheticSpec> out;
  if (list->is_array()) {
    for (std::size_t k = 0; k < list->size(); ++k) out.push_back(spec_from_json((*list)[k], k));
  } else {
    out.push_back(spec_from_json(*list, 0));
  }
  if (out.empty()) throw ValidationError("topics", "no synthetic specs given");
  std::unordered_set<std::string> ids;
  for (const auto& s : out) {
    if (!ids.insert(s.topic_id).second) throw ValidationError("topic", "duplicate topic id '" + s.topic_id + "'");
  }
  return out;
}

std::vector<SyntheticSpec> load_synthetic_specs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open spec file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_synthetic_specs(buf.str(), path);
}

std::string serialize_synthetic_specs(std::span<const SyntheticSpec> specs) {
  json list = json::array();
  for (const auto& s : specs) {
    json params = {{"a", s.a}};
    if (s.kind != GeneratorKind::Uniform && s.kind != GeneratorKind::APPrior) params["b"] = s.b;
    if (s.kind == GeneratorKind::Hyperbolic) params["c"] = s.c;
    list.push_back({{"topic", s.topic_id},
                    {"n", s.n},
                    {"kind", std::string(to_string(s.kind))},
                    {"params", params},
                    {"seed", s.seed},
                    {"noise", s.noise}});
  }
  return json{{"topics", list}}.dump(2) + "\n";
}

std::pair<RunRanking, Qrels> export_topics(std::span<const RankedTopic> topics) {
  RunRanking run;
  Qrels qrels;
  for (const auto& t : topics) {
    auto& entries = run.topics[t.topic_id()];
    for (std::int64_t r = 1; r <= t.n(); ++r) {
      std::string doc = t.topic_id() + "-d" + std::to_string(r);
      if (t.relevant_at(r)) qrels.add(t.topic_id(), doc, 1);
      entries.push_back({std::move(doc), r, static_cast<double>(t.n() - r + 1)});
    }
  }
  return {std::move(run), std::move(qrels)};
}

} // namespace tarstop
