#include "cli_app.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include "tarstop/baselines.hpp"
#include "tarstop/corpus_io.hpp"
#include "tarstop/error.hpp"
#include "tarstop/eval_metrics.hpp"
#include "tarstop/json_io.hpp"
#include "tarstop/random.hpp"
#include "tarstop/stopping_engine.hpp"

namespace tarstop::cli {

namespace {

using nlohmann::json;

constexpr std::size_t kMaxSweepCombinations = 10000;

const std::vector<std::string> kMethodNames = {"ip", "cox", "oracle", "target", "target-adapted", "knee"};

struct Options {
  std::string run_path;
  std::string qrels_path;
  std::string spec_path;

  double target_recall = 0.9;
  double confidence = 0.95;
  double alpha = 0.025;
  double beta = 0.025;
  double nrmse_threshold = 0.1;
  std::string rate = "hyp";
  std::string process = "ip";
  std::string min_rel = "dynamic";
  std::string batch = "uniform";
  std::size_t window = 25;
  int cox_grid = 9;
  std::string stop_rule = "ceil";
  std::string estimate = "upper";

  std::uint64_t seed = kDefaultSeed;
  unsigned jobs = 1;
  std::string format = "csv";
  std::string output;
  std::string per_topic;
  bool trace = false;

  std::vector<std::string> methods;
  std::int64_t target_size = 10;
  double rho = 6.0;

  std::vector<std::string> processes;
  std::vector<std::string> rates;
  std::vector<double> nrmse_thresholds;
  std::vector<std::string> min_rels;
  std::vector<double> target_recalls;
  std::vector<double> confidences;

  std::string export_run;
  std::string export_qrels;
};

// ---------------------------------------------------------------------------
// Formatting
// ---------------------------------------------------------------------------

std::string num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string flag(bool b) { return b ? "1" : "0"; }

class CsvWriter {
public:
  explicit CsvWriter(const std::vector<std::string>& header) { row(header); }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  std::string str() const { return out_.str(); }

private:
  std::ostringstream out_;
};

json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json jnum(const std::optional<double>& v) { return v ? jnum(*v) : json(nullptr); }

// ---------------------------------------------------------------------------
// Parallel execution with index-ordered results
// ---------------------------------------------------------------------------

template <class Fn>
void parallel_for(std::size_t count, unsigned jobs, Fn fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), std::max<std::size_t>(count, 1)));
  std::vector<std::exception_ptr> errors(count);
  auto work = [&](unsigned w) {
    for (std::size_t i = w; i < count; i += workers) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

StoppingConfig build_config(const Options& o) {
  StoppingConfig c = default_config();
  c.target_recall = o.target_recall;
  c.confidence = o.confidence;
  c.alpha = o.alpha;
  c.beta = o.beta;
  c.nrmse_threshold = o.nrmse_threshold;
  c.rate_kind = parse_rate_kind(o.rate);
  c.process = parse_process_kind(o.process);
  c.min_rel = parse_min_relevant_rule(o.min_rel);
  c.batch_schedule = parse_batch_schedule(o.batch);
  c.window_size = o.window;
  c.cox_grid = o.cox_grid;
  if (o.stop_rule == "ceil") {
    c.stop_rule = StopRule::Ceiling;
  } else if (o.stop_rule == "strict") {
    c.stop_rule = StopRule::StrictLess;
  } else {
    throw ConfigError("unknown stop rule '" + o.stop_rule + "' (expected ceil or strict)");
  }
  if (o.estimate == "upper") {
    c.remaining_statistic = RemainingStatistic::UpperBound;
  } else if (o.estimate == "mean") {
    c.remaining_statistic = RemainingStatistic::Mean;
  } else {
    throw ConfigError("unknown estimate '" + o.estimate + "' (expected upper or mean)");
  }
  c.validate();
  return c;
}

std::vector<std::string> parse_methods(const std::vector<std::string>& names) {
  std::vector<std::string> out;
  for (const auto& name : names) {
    if (name == "qbcb") {
      throw ConfigError("method 'qbcb' is not available in this build");
    }
    if (std::find(kMethodNames.begin(), kMethodNames.end(), name) == kMethodNames.end()) {
      std::string valid;
      for (const auto& m : kMethodNames) valid += (valid.empty() ? "" : ", ") + m;
      throw ConfigError("unknown method '" + name + "' (valid: " + valid + ")");
    }
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  }
  if (out.empty()) throw ConfigError("no methods given");
  return out;
}

void check_format(const Options& o) {
  if (o.format != "csv" && o.format != "json") {
    throw ConfigError("unknown format '" + o.format + "' (expected csv or json)");
  }
  if (o.jobs == 0) throw ConfigError("--jobs must be >= 1");
  if (o.target_size < 1) throw ConfigError("--target-size must be >= 1");
  if (!(o.rho > 0.0)) throw ConfigError("--rho must be > 0");
}

// ---------------------------------------------------------------------------
// Inputs
// ---------------------------------------------------------------------------

std::vector<RankedTopic> load_topics(const Options& o, std::vector<SyntheticSpec>* specs_out = nullptr) {
  std::vector<RankedTopic> topics;
  if (!o.spec_path.empty()) {
    if (!o.run_path.empty() || !o.qrels_path.empty()) {
      throw ConfigError("--spec cannot be combined with --run/--qrels");
    }
    auto specs = load_synthetic_specs(o.spec_path);
    std::sort(specs.begin(), specs.end(),
              [](const SyntheticSpec& a, const SyntheticSpec& b) { return a.topic_id < b.topic_id; });
    for (const auto& s : specs) topics.push_back(generate_synthetic(s));
    if (specs_out) *specs_out = std::move(specs);
  } else {
    if (o.run_path.empty() || o.qrels_path.empty()) {
      throw ConfigError("either --spec or both --run and --qrels are required");
    }
    const RunRanking run = load_run(o.run_path);
    const Qrels qrels = load_qrels(o.qrels_path);
    topics = join_all(run, qrels);
  }
  if (topics.empty()) throw InputError("no topics to process");
  return topics;
}

// ---------------------------------------------------------------------------
// Methods
// ---------------------------------------------------------------------------

struct MethodRun {
  std::string name;   ///< ip, cox, oracle, ...
  std::string label;  ///< output label, e.g. ip-hyp
  StoppingConfig config;
};

MethodRun make_method(const std::string& name, const StoppingConfig& base) {
  MethodRun m{name, name, base};
  if (name == "ip") {
    m.config.process = ProcessKind::InhomogeneousPoisson;
    m.label = method_label(m.config);
  } else if (name == "cox") {
    m.config.process = ProcessKind::Cox;
    m.label = method_label(m.config);
  }
  return m;
}

StoppingOutcome run_method(const MethodRun& m, const RankedTopic& topic, const Options& o) {
  StoppingOutcome out;
  if (m.name == "ip" || m.name == "cox") {
    out = run_stopping(topic, m.config);
  } else if (m.name == "oracle") {
    out = oracle_stop(topic, m.config.target_recall);
  } else if (m.name == "target") {
    out = target_stop(topic, {o.target_size, derive_seed(o.seed, topic.topic_id())});
  } else if (m.name == "target-adapted") {
    const double l = std::min(m.config.target_recall, 0.99);
    out = target_stop(topic, {adapted_target_size(l, m.config.confidence), derive_seed(o.seed, topic.topic_id())});
  } else {
    KneeConfig kc;
    kc.rho_threshold = o.rho;
    kc.alpha = m.config.alpha;
    kc.beta = m.config.beta;
    kc.batch_schedule = m.config.batch_schedule;
    out = knee_stop(topic, kc);
  }
  out.method = m.label;
  return out;
}

struct TopicResult {
  std::string topic;
  std::string method;
  std::int64_t n = 0;
  std::int64_t R = 0;
  TopicMetrics metrics;
  std::optional<double> remaining;
  double effectiveness = 0.0;
  StoppingOutcome outcome;
};

TopicResult evaluate_one(const MethodRun& m, const RankedTopic& topic, const Options& o) {
  TopicResult r;
  r.outcome = run_method(m, topic, o);
  r.topic = topic.topic_id();
  r.method = m.label;
  r.n = topic.n();
  r.R = topic.total_relevant();
  r.metrics = topic_metrics(r.outcome, topic, m.config.target_recall);
  r.remaining = mean_remaining_error(r.outcome, topic);
  r.effectiveness = ranking_effectiveness(topic);
  return r;
}

struct Aggregate {
  std::string method;
  double target_recall = 0.0;
  CollectionMetrics metrics;
  std::optional<double> remaining_mean;
};

Aggregate aggregate_results(const std::string& method, double target_recall, std::span<const TopicResult> results) {
  std::vector<TopicMetrics> ms;
  std::vector<double> rem;
  for (const auto& r : results) {
    ms.push_back(r.metrics);
    if (r.remaining) rem.push_back(*r.remaining);
  }
  Aggregate a{method, target_recall, aggregate(ms), std::nullopt};
  if (!rem.empty()) a.remaining_mean = mean_std(rem).mean;
  return a;
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

const std::vector<std::string> kPerTopicHeader = {
    "topic",     "method",     "recall",        "cost", "hit_target", "RE",  "loss_r", "loss_e",
    "loss_er",   "stop_rank",  "docs_examined", "rel_found", "n",     "R",   "hit_end", "remaining_error"};

std::vector<std::string> per_topic_cells(const TopicResult& r) {
  const auto& m = r.metrics;
  return {r.topic,
          r.method,
          num(m.recall),
          num(m.cost),
          flag(m.hit_target),
          num(m.relative_error),
          num(m.loss_r),
          num(m.loss_e),
          num(m.loss_er),
          std::to_string(r.outcome.stop_rank),
          std::to_string(r.outcome.docs_examined),
          std::to_string(r.outcome.rel_found),
          std::to_string(r.n),
          std::to_string(r.R),
          flag(r.outcome.hit_end),
          num(r.remaining)};
}

json per_topic_json(const TopicResult& r, bool traces, bool effectiveness) {
  json j = {{"topic", r.topic}, {"method", r.method}};
  j.update(json(r.metrics));
  j["stop_rank"] = r.outcome.stop_rank;
  j["docs_examined"] = r.outcome.docs_examined;
  j["rel_found"] = r.outcome.rel_found;
  j["n"] = r.n;
  j["R"] = r.R;
  j["hit_end"] = r.outcome.hit_end;
  j["remaining_error"] = jnum(r.remaining);
  if (effectiveness) j["effectiveness"] = jnum(r.effectiveness);
  if (traces) j["traces"] = r.outcome.traces;
  return j;
}

std::vector<std::string> metric_header_cells() {
  std::vector<std::string> h;
  for (const char* m : {"recall", "cost", "RE", "loss_r", "loss_e", "loss_er"}) {
    h.push_back(std::string(m) + "_mean");
    h.push_back(std::string(m) + "_std");
  }
  h.push_back("reliability");
  h.push_back("remaining_error_mean");
  return h;
}

std::vector<std::string> metric_cells(const Aggregate& a) {
  const auto& c = a.metrics;
  std::vector<std::string> cells;
  for (const MeanStd* ms : {&c.recall, &c.cost, &c.relative_error, &c.loss_r, &c.loss_e, &c.loss_er}) {
    cells.push_back(num(ms->mean));
    cells.push_back(num(ms->std));
  }
  cells.push_back(num(c.reliability));
  cells.push_back(num(a.remaining_mean));
  return cells;
}

json aggregate_json(const Aggregate& a) {
  json j = {{"method", a.method}, {"target_recall", a.target_recall}};
  j.update(json(a.metrics));
  j["remaining_error_mean"] = jnum(a.remaining_mean);
  return j;
}

// ---------------------------------------------------------------------------
// Output staging
// ---------------------------------------------------------------------------

struct PendingOutput {
  std::string path; ///< empty: the out stream
  std::string content;
};

/// Stages every file next to its target, then renames them into place, so a
/// failed write leaves no output behind.
void flush_outputs(const std::vector<PendingOutput>& outputs, std::ostream& out) {
  namespace fs = std::filesystem;
  std::vector<std::pair<fs::path, fs::path>> staged;
  const auto discard = [&] {
    std::error_code ec;
    for (const auto& [tmp, target] : staged) fs::remove(tmp, ec);
  };
  std::vector<const PendingOutput*> streamed;
  for (const auto& p : outputs) {
    if (p.path.empty()) continue;
    fs::path target = p.path;
    std::error_code ec;
    const auto st = fs::status(target, ec);
    if (fs::exists(st) && !fs::is_regular_file(st)) {
      streamed.push_back(&p);
      continue;
    }
    if (fs::is_symlink(fs::symlink_status(target, ec))) target = fs::canonical(target, ec);
    fs::path tmp = target;
    tmp += ".tmp";
    staged.emplace_back(tmp, target);
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    f << p.content;
    f.close();
    if (!f) {
      discard();
      throw InputError("cannot write '" + p.path + "'");
    }
  }
  for (const auto& [tmp, target] : staged) {
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
      discard();
      throw InputError("cannot write '" + target.string() + "': " + ec.message());
    }
  }
  for (const auto* p : streamed) {
    std::ofstream f(p->path, std::ios::binary);
    f << p->content;
    if (!f) throw InputError("cannot write '" + p->path + "'");
  }
  for (const auto& p : outputs) {
    if (p.path.empty()) out << p.content;
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

std::vector<PendingOutput> cmd_stop(const Options& o) {
  check_format(o);
  const StoppingConfig config = build_config(o);
  const auto topics = load_topics(o);
  std::vector<StoppingOutcome> outcomes(topics.size());
  parallel_for(topics.size(), o.jobs, [&](std::size_t i) { outcomes[i] = run_stopping(topics[i], config); });

  std::string text;
  if (o.format == "json") {
    json records = json::array();
    for (std::size_t i = 0; i < topics.size(); ++i) {
      json r = outcome_json(outcomes[i], o.trace);
      r["n"] = topics[i].n();
      r["R"] = topics[i].total_relevant();
      records.push_back(std::move(r));
    }
    text = dump({{"config", config}, {"records", records}});
  } else if (o.trace) {
    CsvWriter csv({"topic", "method", "k", "rel_found", "gate", "a", "b", "c", "nrmse", "lambda_mass",
                   "upper_bound", "r_hat", "cox_fallback", "stop"});
    for (const auto& oc : outcomes) {
      for (const auto& t : oc.traces) {
        std::string a, b, c, nr, mass, ub, fb;
        if (t.curve) {
          const auto& p = t.curve->params;
          a = num(p.a);
          if (p.kind != RateKind::APPrior) b = num(p.b);
          if (p.kind == RateKind::Hyperbolic) c = num(p.c);
          nr = num(t.curve->nrmse);
        }
        if (t.estimate) {
          mass = num(t.estimate->lambda_mass);
          ub = std::to_string(t.estimate->upper_bound);
          fb = flag(t.estimate->cox_fallback);
        }
        csv.row({oc.topic_id, oc.method, std::to_string(t.k), std::to_string(t.rel_found),
                 std::string(to_string(t.gate)), a, b, c, nr, mass, ub, num(t.r_hat), fb, flag(t.stop_decision)});
      }
    }
    text = csv.str();
  } else {
    CsvWriter csv({"topic", "method", "n", "R", "stop_rank", "docs_examined", "rel_found", "hit_end",
                   "cox_fallbacks"});
    for (std::size_t i = 0; i < topics.size(); ++i) {
      const auto& oc = outcomes[i];
      csv.row({oc.topic_id, oc.method, std::to_string(topics[i].n()), std::to_string(topics[i].total_relevant()),
               std::to_string(oc.stop_rank), std::to_string(oc.docs_examined), std::to_string(oc.rel_found),
               flag(oc.hit_end), std::to_string(oc.cox_fallbacks())});
    }
    text = csv.str();
  }
  return {{o.output, text}};
}

/// Runs every method on every topic and renders aggregate and per-topic tables.
std::vector<PendingOutput> run_methods(const Options& o, const std::vector<std::string>& method_names,
                                       const std::vector<RankedTopic>& topics, bool effectiveness) {
  const StoppingConfig base = build_config(o);
  std::vector<MethodRun> methods;
  for (const auto& name : method_names) methods.push_back(make_method(name, base));
  std::sort(methods.begin(), methods.end(), [](const MethodRun& a, const MethodRun& b) { return a.label < b.label; });

  const std::size_t tasks = topics.size() * methods.size();
  std::vector<TopicResult> results(tasks);
  // Task index = topic * methods + method, so results come out sorted by topic then method.
  parallel_for(tasks, o.jobs, [&](std::size_t i) {
    results[i] = evaluate_one(methods[i % methods.size()], topics[i / methods.size()], o);
  });

  std::vector<Aggregate> aggregates;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    std::vector<TopicResult> rows;
    for (std::size_t t = 0; t < topics.size(); ++t) rows.push_back(results[t * methods.size() + m]);
    aggregates.push_back(aggregate_results(methods[m].label, base.target_recall, rows));
  }

  std::vector<PendingOutput> outputs;
  if (o.format == "json") {
    json aggs = json::array();
    for (const auto& a : aggregates) aggs.push_back(aggregate_json(a));
    json rows = json::array();
    for (const auto& r : results) rows.push_back(per_topic_json(r, o.trace, effectiveness));
    outputs.push_back({o.output, dump({{"config", base}, {"aggregates", aggs}, {"topics", rows}})});
    if (!o.per_topic.empty()) outputs.push_back({o.per_topic, dump(rows)});
  } else {
    std::vector<std::string> header = {"method", "target_recall", "topics"};
    for (auto& h : metric_header_cells()) header.push_back(h);
    CsvWriter agg(header);
    for (const auto& a : aggregates) {
      std::vector<std::string> cells = {a.method, num(a.target_recall), std::to_string(a.metrics.topics)};
      for (auto& c : metric_cells(a)) cells.push_back(c);
      agg.row(cells);
    }
    outputs.push_back({o.output, agg.str()});
    if (!o.per_topic.empty()) {
      auto ph = kPerTopicHeader;
      if (effectiveness) ph.push_back("effectiveness");
      CsvWriter pt(ph);
      for (const auto& r : results) {
        auto cells = per_topic_cells(r);
        if (effectiveness) cells.push_back(num(r.effectiveness));
        pt.row(cells);
      }
      outputs.push_back({o.per_topic, pt.str()});
    }
  }
  return outputs;
}

std::vector<PendingOutput> cmd_evaluate(const Options& o) {
  check_format(o);
  const auto methods = parse_methods(o.methods.empty() ? std::vector<std::string>{"ip"} : o.methods);
  build_config(o);
  return run_methods(o, methods, load_topics(o), false);
}

std::vector<PendingOutput> cmd_compare(const Options& o) {
  check_format(o);
  auto methods = parse_methods(o.methods.empty() ? std::vector<std::string>{"ip", "target", "knee"} : o.methods);
  if (std::find(methods.begin(), methods.end(), "oracle") == methods.end()) methods.push_back("oracle");
  build_config(o);
  return run_methods(o, methods, load_topics(o), false);
}

std::vector<PendingOutput> cmd_simulate(const Options& o) {
  check_format(o);
  if (o.spec_path.empty()) throw ConfigError("simulate requires --spec");
  const auto methods = parse_methods(o.methods.empty() ? std::vector<std::string>{"ip", "oracle"} : o.methods);
  build_config(o);
  const auto topics = load_topics(o);
  auto outputs = run_methods(o, methods, topics, true);
  if (!o.export_run.empty() || !o.export_qrels.empty()) {
    const auto [run, qrels] = export_topics(topics);
    if (!o.export_run.empty()) outputs.push_back({o.export_run, serialize_run(run)});
    if (!o.export_qrels.empty()) outputs.push_back({o.export_qrels, serialize_qrels(qrels)});
  }
  return outputs;
}

struct SweepPoint {
  std::string process;
  std::string rate;
  double nrmse_threshold;
  std::string min_rel;
  double target_recall;
  double confidence;
  StoppingConfig config;
};

std::vector<PendingOutput> cmd_sweep(const Options& o) {
  check_format(o);
  build_config(o);
  const auto or_default = [](const auto& grid, const auto& value) {
    using T = std::decay_t<decltype(value)>;
    return grid.empty() ? std::vector<T>{value} : std::vector<T>(grid.begin(), grid.end());
  };
  const auto processes = or_default(o.processes, o.process);
  const auto rates = or_default(o.rates, o.rate);
  const auto nrmses = or_default(o.nrmse_thresholds, o.nrmse_threshold);
  const auto min_rels = or_default(o.min_rels, o.min_rel);
  const auto ls = or_default(o.target_recalls, o.target_recall);
  const auto ps = or_default(o.confidences, o.confidence);

  const std::size_t combos =
      processes.size() * rates.size() * nrmses.size() * min_rels.size() * ls.size() * ps.size();
  if (combos > kMaxSweepCombinations) {
    throw ConfigError("sweep grid has " + std::to_string(combos) + " combinations; the limit is " +
                      std::to_string(kMaxSweepCombinations));
  }

  std::vector<SweepPoint> grid;
  for (double l : ls)
    for (double p : ps)
      for (const auto& proc : processes)
        for (const auto& rate : rates)
          for (double nr : nrmses)
            for (const auto& mr : min_rels) {
              Options v = o;
              v.process = proc;
              v.rate = rate;
              v.nrmse_threshold = nr;
              v.min_rel = mr;
              v.target_recall = l;
              v.confidence = p;
              StoppingConfig c = build_config(v);
              grid.push_back({std::string(short_name(c.process)), std::string(short_name(c.rate_kind)), nr,
                              to_string(c.min_rel), l, p, c});
            }

  const auto topics = load_topics(o);
  const std::size_t tasks = grid.size() * topics.size();
  std::vector<TopicResult> results(tasks);
  parallel_for(tasks, o.jobs, [&](std::size_t i) {
    const auto& g = grid[i / topics.size()];
    MethodRun m{std::string(short_name(g.config.process)), method_label(g.config), g.config};
    results[i] = evaluate_one(m, topics[i % topics.size()], o);
  });

  std::vector<Aggregate> aggs;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::span<const TopicResult> rows(results.data() + g * topics.size(), topics.size());
    aggs.push_back(aggregate_results(method_label(grid[g].config), grid[g].target_recall, rows));
  }
  std::vector<bool> pareto(grid.size(), true);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = 0; j < grid.size(); ++j) {
      if (i == j || grid[i].target_recall != grid[j].target_recall) continue;
      const double ci = aggs[i].metrics.cost.mean, cj = aggs[j].metrics.cost.mean;
      const double ri = aggs[i].metrics.reliability, rj = aggs[j].metrics.reliability;
      if (cj <= ci && rj >= ri && (cj < ci || rj > ri)) {
        pareto[i] = false;
        break;
      }
    }
  }

  const auto point_json = [](const SweepPoint& g) {
    return json{{"process", g.process},       {"rate", g.rate},
                {"nrmse_threshold", g.nrmse_threshold}, {"min_rel", g.min_rel},
                {"target_recall", g.target_recall},     {"confidence", g.confidence}};
  };
  const auto point_cells = [](const SweepPoint& g) {
    return std::vector<std::string>{g.process, g.rate, num(g.nrmse_threshold), g.min_rel, num(g.target_recall),
                                    num(g.confidence)};
  };
  const std::vector<std::string> point_header = {"process", "rate",          "nrmse_threshold",
                                                 "min_rel", "target_recall", "confidence"};

  std::vector<PendingOutput> outputs;
  if (o.format == "json") {
    json agg_rows = json::array();
    json topic_rows = json::array();
    for (std::size_t g = 0; g < grid.size(); ++g) {
      json a = point_json(grid[g]);
      a.update(aggregate_json(aggs[g]));
      a["pareto"] = static_cast<bool>(pareto[g]);
      agg_rows.push_back(std::move(a));
      for (std::size_t t = 0; t < topics.size(); ++t) {
        json r = point_json(grid[g]);
        r.update(per_topic_json(results[g * topics.size() + t], o.trace, false));
        topic_rows.push_back(std::move(r));
      }
    }
    outputs.push_back({o.output, dump({{"aggregates", agg_rows}, {"topics", topic_rows}})});
    if (!o.per_topic.empty()) outputs.push_back({o.per_topic, dump(topic_rows)});
  } else {
    auto header = point_header;
    header.push_back("method");
    header.push_back("topics");
    for (auto& h : metric_header_cells()) header.push_back(h);
    header.push_back("pareto");
    CsvWriter agg(header);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      auto cells = point_cells(grid[g]);
      cells.push_back(aggs[g].method);
      cells.push_back(std::to_string(aggs[g].metrics.topics));
      for (auto& c : metric_cells(aggs[g])) cells.push_back(c);
      cells.push_back(flag(pareto[g]));
      agg.row(cells);
    }
    outputs.push_back({o.output, agg.str()});
    if (!o.per_topic.empty()) {
      auto ph = point_header;
      for (auto& h : kPerTopicHeader) ph.push_back(h);
      CsvWriter pt(ph);
      for (std::size_t g = 0; g < grid.size(); ++g) {
        for (std::size_t t = 0; t < topics.size(); ++t) {
          auto cells = point_cells(grid[g]);
          for (auto& c : per_topic_cells(results[g * topics.size() + t])) cells.push_back(c);
          pt.row(cells);
        }
      }
      outputs.push_back({o.per_topic, pt.str()});
    }
  }
  return outputs;
}

// ---------------------------------------------------------------------------
// Argument wiring
// ---------------------------------------------------------------------------

void add_inputs(CLI::App* app, Options& o, bool spec_only) {
  if (!spec_only) {
    app->add_option("--run", o.run_path, "TREC run file")->check(CLI::ExistingFile);
    app->add_option("--qrels", o.qrels_path, "TREC qrels file")->check(CLI::ExistingFile);
  }
  app->add_option("--spec", o.spec_path, "synthetic topic spec (JSON)")->check(CLI::ExistingFile);
}

void add_config(CLI::App* app, Options& o) {
  app->add_option("--target-recall", o.target_recall, "target recall l")->capture_default_str();
  app->add_option("--confidence", o.confidence, "confidence level p")->capture_default_str();
  app->add_option("--alpha", o.alpha, "first checkpoint as a fraction of n")->capture_default_str();
  app->add_option("--beta", o.beta, "checkpoint step as a fraction of n")->capture_default_str();
  app->add_option("--nrmse-threshold", o.nrmse_threshold, "largest accepted fit NRMSE")->capture_default_str();
  app->add_option("--rate", o.rate, "rate function: exp, hyp, pow, ap")->capture_default_str();
  app->add_option("--process", o.process, "point process: ip, cox")->capture_default_str();
  app->add_option("--min-rel", o.min_rel, "minimum relevant rule: static10, static20, dynamic")
      ->capture_default_str();
  app->add_option("--batch", o.batch, "checkpoint schedule: uniform, autotar")->capture_default_str();
  app->add_option("--window", o.window, "documents per rate estimate window")->capture_default_str();
  app->add_option("--cox-grid", o.cox_grid, "Cox quadrature points per parameter (odd)")->capture_default_str();
  app->add_option("--stop-rule", o.stop_rule, "stop test: ceil, strict")->capture_default_str();
  app->add_option("--estimate", o.estimate, "remaining-count statistic: upper, mean")->capture_default_str();
}

void add_output(CLI::App* app, Options& o, bool per_topic) {
  app->add_option("--seed", o.seed, "base seed for randomised methods")->capture_default_str();
  app->add_option("--jobs", o.jobs, "worker threads")->capture_default_str();
  app->add_option("--format", o.format, "output format: csv, json")->capture_default_str();
  app->add_option("--output", o.output, "output file (default: stdout)");
  app->add_flag("--trace", o.trace, "include per-checkpoint traces");
  if (per_topic) app->add_option("--per-topic", o.per_topic, "per-topic results file");
}

void add_methods(CLI::App* app, Options& o, const std::string& defaults) {
  app->add_option("--methods", o.methods, "comma-separated methods (default: " + defaults + ")")->delimiter(',');
  app->add_option("--target-size", o.target_size, "sample target for the target method")->capture_default_str();
  app->add_option("--rho", o.rho, "knee slope-ratio threshold")->capture_default_str();
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Stopping methods for technology-assisted review", "tarstop"};
  app.require_subcommand(1, 1);

  auto* stop = app.add_subcommand("stop", "run the estimator on every topic and report where it stops");
  add_inputs(stop, o, false);
  add_config(stop, o);
  add_output(stop, o, false);

  auto* evaluate = app.add_subcommand("evaluate", "score methods on every topic");
  add_inputs(evaluate, o, false);
  add_config(evaluate, o);
  add_output(evaluate, o, true);
  add_methods(evaluate, o, "ip");

  auto* compare = app.add_subcommand("compare", "score methods side by side, always including oracle");
  add_inputs(compare, o, false);
  add_config(compare, o);
  add_output(compare, o, true);
  add_methods(compare, o, "ip,target,knee");

  auto* sweep = app.add_subcommand("sweep", "grid search over estimator settings");
  add_inputs(sweep, o, false);
  add_config(sweep, o);
  add_output(sweep, o, true);
  sweep->add_option("--processes", o.processes, "grid of processes")->delimiter(',');
  sweep->add_option("--rates", o.rates, "grid of rate functions")->delimiter(',');
  sweep->add_option("--nrmse-thresholds", o.nrmse_thresholds, "grid of NRMSE thresholds")->delimiter(',');
  sweep->add_option("--min-rels", o.min_rels, "grid of minimum relevant rules")->delimiter(',');
  sweep->add_option("--target-recalls", o.target_recalls, "grid of target recalls")->delimiter(',');
  sweep->add_option("--confidences", o.confidences, "grid of confidence levels")->delimiter(',');

  auto* simulate = app.add_subcommand("simulate", "generate synthetic topics and score methods on them");
  add_inputs(simulate, o, true);
  add_config(simulate, o);
  add_output(simulate, o, true);
  add_methods(simulate, o, "ip,oracle");
  simulate->add_option("--export-run", o.export_run, "write the generated rankings as a TREC run");
  simulate->add_option("--export-qrels", o.export_qrels, "write the generated labels as TREC qrels");

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    std::vector<PendingOutput> outputs;
    if (stop->parsed()) {
      outputs = cmd_stop(o);
    } else if (evaluate->parsed()) {
      outputs = cmd_evaluate(o);
    } else if (compare->parsed()) {
      outputs = cmd_compare(o);
    } else if (sweep->parsed()) {
      outputs = cmd_sweep(o);
    } else {
      outputs = cmd_simulate(o);
    }
    flush_outputs(outputs, out);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

} // namespace tarstop::cli
