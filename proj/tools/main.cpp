#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ghostmark/corpus.hpp"
#include "ghostmark/detector.hpp"
#include "ghostmark/errors.hpp"
#include "ghostmark/genclient.hpp"
#include "ghostmark/lexicon.hpp"
#include "ghostmark/metrics.hpp"
#include "ghostmark/mitigate.hpp"
#include "ghostmark/report.hpp"
#include "ghostmark/runner.hpp"
#include "ghostmark/stats.hpp"
#include "ghostmark/text_norm.hpp"
#include "mock_endpoint.hpp"

namespace {

using namespace ghostmark;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRemote = 3;

int guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const RemoteError& e) {  // covers AuthError
    std::cerr << "error: " << e.what() << "\n";
    return kExitRemote;
  } catch (const Error& e) {  // parse + validation + io
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}

ReportFormat parse_format(const std::string& f) {
  if (f == "csv") {
    return ReportFormat::Csv;
  }
  if (f == "json") {
    return ReportFormat::Json;
  }
  return ReportFormat::Text;
}

void emit(const std::string& content, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("cannot write " + out_path);
  }
  out << content;
}

// ---------------------------------------------------------------- annotate

struct AnnotateOpts {
  std::string lexicon_path;
  std::string corpus_path;
  std::string out_path;  // detection JSONL; summary always goes to stdout
  std::string format = "text";
};

int cmd_annotate(const AnnotateOpts& opts) {
  Lexicon lexicon = load_lexicon(opts.lexicon_path);
  Corpus corpus = ingest(opts.corpus_path);

  Tally tally;
  std::string detections;
  for (const TextRecord& r : corpus.records()) {
    DetectionResult det = detect(r.text, lexicon);
    det.text_id = r.id;
    json occs = json::array();
    for (const MarkerOccurrence& occ : det.occurrences) {
      occs.push_back({{"end", occ.end},
                      {"marker_id", occ.marker_id},
                      {"start", occ.start},
                      {"surface", occ.surface}});
      const Marker* m = lexicon.find(occ.marker_id);
      ++tally.at(m->variety, m->category);
    }
    json line;
    line["occurrences"] = std::move(occs);
    line["text_id"] = det.text_id;
    detections += line.dump();
    detections += '\n';
  }
  if (!opts.out_path.empty()) {
    emit(detections, opts.out_path);
  }

  AggregateTable summary("annotate",
                         {"variety", "lexical", "pragmatic", "syntactic", "total"});
  for (Variety v : kMarkerVarieties) {
    summary.add_row({std::string(to_string(v)), tally.at(v, Category::Lexical),
                     tally.at(v, Category::Pragmatic), tally.at(v, Category::Syntactic),
                     tally.variety_total(v)});
  }
  summary.add_row({std::string("total"), tally.category_total(Category::Lexical),
                   tally.category_total(Category::Pragmatic),
                   tally.category_total(Category::Syntactic), tally.total()});
  std::cout << render(summary, parse_format(opts.format));
  return kExitOk;
}

// --------------------------------------------------------------------- run

struct RunOpts {
  std::string config_path;
  std::string out_dir;
  int max_in_flight = 0;  // 0: keep config value
  long seed = -1;         // <0: keep config value
  bool mock = false;
  int mock_latency_ms = 0;
};

void apply_mock(ExperimentConfig& cfg, const std::string& url) {
  for (ModelEndpoint& m : cfg.models) {
    m.base_url = url;
  }
  if (cfg.embedding) {
    cfg.embedding->base_url = url;
  }
  if (cfg.judge) {
    cfg.judge->base_url = url;
  }
}

void require_api_key(const ExperimentConfig& cfg) {
  if (std::getenv(cfg.api_key_env.c_str()) == nullptr) {
    throw ValidationError("api key environment variable " + cfg.api_key_env +
                          " is not set (use --mock for offline runs)");
  }
}

int cmd_run(const RunOpts& opts) {
  ExperimentConfig cfg = ExperimentConfig::load(opts.config_path);
  if (!opts.out_dir.empty()) {
    cfg.output_dir = opts.out_dir;
  }
  if (opts.max_in_flight > 0) {
    cfg.concurrency = opts.max_in_flight;
  }
  if (opts.seed >= 0) {
    cfg.params.seed = opts.seed;
  }

  std::unique_ptr<tools::MockEndpoint> mock;
  if (opts.mock) {
    mock = std::make_unique<tools::MockEndpoint>(opts.mock_latency_ms);
    apply_mock(cfg, mock->base_url());
  } else {
    require_api_key(cfg);
  }

  ExperimentRunner runner(std::move(cfg));
  ExperimentRunner::Outcome outcome = runner.execute();
  std::cout << "cells expected " << outcome.manifest.expected() << ", resumed "
            << outcome.resumed << ", completed " << outcome.newly_completed << ", failed "
            << outcome.failed << "\n"
            << "cells: " << outcome.cells_path.string() << "\n"
            << "manifest: " << outcome.manifest_path.string() << "\n";
  if (outcome.failed > 0) {
    for (const CellState& c : outcome.manifest.cells) {
      if (c.status == CellStatus::Failed) {
        std::cerr << "failed cell (" << c.key.text_id << ", " << c.key.model_id << ", "
                  << to_string(c.key.condition) << "): " << c.error << "\n";
      }
    }
    return kExitRemote;
  }
  return kExitOk;
}

// ------------------------------------------------------------------ report

struct ReportOpts {
  std::string cells_path;
  std::string lexicon_path;
  std::string out_dir;
  std::string format = "text";
  std::string table = "all";
  std::string condition = "Baseline";
};

int cmd_report(const ReportOpts& opts) {
  std::vector<ScoredCell> cells = load_scored_cells(opts.cells_path);
  Lexicon lexicon = load_lexicon(opts.lexicon_path);
  auto cond = condition_from_string(opts.condition);
  if (!cond) {
    throw ValidationError("unknown condition \"" + opts.condition + "\"");
  }
  std::vector<ScoredCell> one_condition;
  for (const ScoredCell& c : cells) {
    if (c.condition == *cond) {
      one_condition.push_back(c);
    }
  }

  std::vector<std::string> wanted;
  if (opts.table == "all") {
    wanted = {"model", "category", "prompt", "modes", "scatter"};
  } else {
    wanted = {opts.table};
  }
  ReportFormat format = parse_format(opts.format);
  if (opts.out_dir.empty() && format == ReportFormat::Csv && wanted.size() > 1) {
    std::cerr << "error: csv to stdout supports a single --table; pass --out DIR for all\n";
    return kExitUsage;
  }

  std::map<std::string, AggregateTable> tables;
  for (const std::string& name : wanted) {
    if (name == "model") {
      tables.emplace(name, model_table(one_condition));
    } else if (name == "category") {
      tables.emplace(name, category_table(one_condition, lexicon));
    } else if (name == "prompt") {
      tables.emplace(name, prompt_table(cells));
    } else if (name == "modes") {
      tables.emplace(name, mode_table(cells));
    } else if (name == "scatter") {
      tables.emplace(name, paradox_scatter(cells));
    }
  }

  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    const char* ext = format == ReportFormat::Csv   ? ".csv"
                      : format == ReportFormat::Json ? ".json"
                                                     : ".txt";
    for (const auto& [name, table] : tables) {
      std::filesystem::path p = std::filesystem::path(opts.out_dir) / (name + ext);
      emit(render(table, format), p.string());
      std::cout << p.string() << "\n";
    }
    return kExitOk;
  }

  if (format == ReportFormat::Json) {
    json combined;
    for (const auto& [name, table] : tables) {
      combined[name] = json::parse(table.render_json());
    }
    std::cout << combined.dump(2) << "\n";
  } else {
    bool first = true;
    for (const auto& [name, table] : tables) {
      if (wanted.size() > 1) {
        std::cout << (first ? "" : "\n") << "# " << name << "\n";
      }
      std::cout << render(table, format);
      first = false;
    }
  }
  return kExitOk;
}

// ----------------------------------------------------------------- rewrite

struct RewriteOpts {
  std::string config_path;
  std::string lexicon_path;  // overrides the config's lexicon when set
  std::string text;
  std::string variety = "IndianEnglish";
  std::string condition = "Baseline";
  std::string model_id;  // default: first model in config
  std::string out_path;
  bool constraints = true;
  int rounds = 3;
  int k = 0;  // 0: keep config value
  long seed = -1;
  double ier_weight = kDefaultIerWeight;
  bool mock = false;
  int mock_latency_ms = 0;
};

json ranked_to_json(const RankedCandidate& rc) {
  json j;
  j["text"] = rc.text;
  j["source_index"] = rc.source_index;
  j["sps"] = {{"dimension", rc.sps.dimension},
              {"provider_id", rc.sps.provider_id},
              {"value", rc.sps.value}};
  if (rc.ier.value) {
    j["ier"] = {{"raw_delta", rc.ier.raw_delta}, {"value", *rc.ier.value}};
  } else {
    j["ier"] = {{"raw_delta", rc.ier.raw_delta}, {"value", nullptr}};
  }
  j["combined"] = rc.combined;
  j["satisfies_constraints"] = rc.satisfies_constraints;
  return j;
}

int cmd_rewrite(const RewriteOpts& opts) {
  ExperimentConfig cfg = ExperimentConfig::load(opts.config_path);
  if (opts.seed >= 0) {
    cfg.params.seed = opts.seed;
  }
  if (opts.k > 0) {
    cfg.params.k_candidates = opts.k;
  }
  validate_params(cfg.params);

  std::unique_ptr<tools::MockEndpoint> mock;
  if (opts.mock) {
    mock = std::make_unique<tools::MockEndpoint>(opts.mock_latency_ms);
    apply_mock(cfg, mock->base_url());
  } else {
    require_api_key(cfg);
  }

  const ModelEndpoint* endpoint = &cfg.models.front();
  if (!opts.model_id.empty()) {
    endpoint = nullptr;
    for (const ModelEndpoint& m : cfg.models) {
      if (m.id == opts.model_id) {
        endpoint = &m;
      }
    }
    if (endpoint == nullptr) {
      throw ValidationError("model \"" + opts.model_id + "\" is not in the config");
    }
  }

  Lexicon lexicon = load_lexicon(opts.lexicon_path.empty()
                                     ? cfg.lexicon_path
                                     : std::filesystem::path(opts.lexicon_path));
  auto cond = condition_from_string(opts.condition);
  if (!cond) {
    throw ValidationError("unknown condition \"" + opts.condition + "\"");
  }
  auto variety = variety_from_string(opts.variety);
  if (!variety) {
    throw ValidationError("unknown variety \"" + opts.variety + "\"");
  }

  TextRecord record;
  record.id = "cli";
  record.text = normalize_text(opts.text);
  record.variety = *variety;
  record.source = Source::Other;
  if (record.text.empty()) {
    throw ValidationError("input text is empty after normalization");
  }

  const char* key_env = std::getenv(cfg.api_key_env.c_str());
  std::string api_key = key_env ? key_env : "";
  ResponseCache cache;
  if (!cfg.cache_dir.empty()) {
    cache = ResponseCache(cfg.cache_dir);
  }
  const ResponseCache* cache_ptr = cache.enabled() ? &cache : nullptr;
  GenerationClient client(endpoint->base_url, api_key, cfg.retry, cache_ptr);

  std::unique_ptr<EmbeddingProvider> provider;
  if (cfg.embedding) {
    provider = std::make_unique<RemoteEmbeddingProvider>(
        EmbeddingClient(cfg.embedding->base_url, cfg.embedding->id, api_key, cfg.retry,
                        cache_ptr),
        cfg.embedding_dimension);
  } else {
    provider = std::make_unique<NgramHashProvider>();
  }

  json result;
  if (opts.constraints) {
    ConstrainedOutcome outcome =
        constrained_generate(record, *cond, cfg.params, client, endpoint->id, lexicon,
                             *provider, opts.rounds, opts.ier_weight);
    result["chosen"] = ranked_to_json(outcome.chosen);
    result["fallback"] = outcome.fallback;
    result["rounds_used"] = outcome.rounds_used;
    json audit = json::array();
    for (const CandidateAudit& a : outcome.audit) {
      audit.push_back({{"round", a.round},
                       {"index_in_round", a.index_in_round},
                       {"text", a.text},
                       {"satisfies", a.satisfies},
                       {"missing", a.missing}});
    }
    result["audit"] = std::move(audit);
  } else {
    WireRequest req = build_request(record, *cond, cfg.params, endpoint->id);
    GenerationRecord rec = client.generate(req);
    if (rec.outputs.empty()) {
      throw RemoteError("model returned zero candidates");
    }
    std::vector<RankedCandidate> ranked =
        rerank(rec.outputs, record, lexicon, *provider, opts.ier_weight);
    result["chosen"] = ranked_to_json(ranked.front());
    json all = json::array();
    for (const RankedCandidate& rc : ranked) {
      all.push_back(ranked_to_json(rc));
    }
    result["ranked"] = std::move(all);
  }
  emit(result.dump(2) + "\n", opts.out_path);
  return kExitOk;
}

// ------------------------------------------------------------------- stats

struct StatsOpts {
  std::string cells_path;
  std::string test;
  std::string condition = "Baseline";
  std::string cond_a = "Baseline";
  std::string cond_b = "Preservation";
  std::string out_path;
};

json anova_to_json(const AnovaResult& r) {
  return {{"f_stat", r.f_stat},         {"df_between", r.df_between},
          {"df_within", r.df_within},   {"p_value", r.p_value},
          {"eta_p_squared", r.eta_p_squared}, {"ss_between", r.ss_between},
          {"ss_within", r.ss_within},   {"ss_subjects", r.ss_subjects},
          {"ss_total", r.ss_total}};
}

std::vector<double> defined_iers(std::span<const ScoredCell> cells,
                                 std::optional<PromptCondition> cond) {
  std::vector<double> out;
  for (const ScoredCell& c : cells) {
    if (c.ier.value && (!cond || c.condition == *cond)) {
      out.push_back(*c.ier.value);
    }
  }
  return out;
}

int cmd_stats(const StatsOpts& opts) {
  std::vector<ScoredCell> cells = load_scored_cells(opts.cells_path);
  json result;

  if (opts.test == "model-anova") {
    auto cond = condition_from_string(opts.condition);
    if (!cond) {
      throw ValidationError("unknown condition \"" + opts.condition + "\"");
    }
    std::map<std::string, std::vector<double>> by_model;
    for (const ScoredCell& c : cells) {
      if (c.condition == *cond && c.ier.value) {
        by_model[c.model_id].push_back(*c.ier.value);
      }
    }
    std::vector<std::vector<double>> groups;
    json order = json::array();
    for (auto& [model, values] : by_model) {
      groups.push_back(std::move(values));
      order.push_back(model);
    }
    result = anova_to_json(one_way_anova(groups));
    result["groups"] = std::move(order);
  } else if (opts.test == "prompt-anova") {
    std::set<PromptCondition> conds;
    for (const ScoredCell& c : cells) {
      conds.insert(c.condition);
    }
    // Subject = (text, model); keep only subjects with a defined IER under
    // every condition so the grid is complete.
    std::map<std::pair<std::string, std::string>, std::map<PromptCondition, double>> subjects;
    for (const ScoredCell& c : cells) {
      if (c.ier.value) {
        subjects[{c.text_id, c.model_id}][c.condition] = *c.ier.value;
      }
    }
    std::vector<std::vector<double>> grid;
    for (const auto& [key, per_cond] : subjects) {
      if (per_cond.size() != conds.size()) {
        continue;
      }
      std::vector<double> row;
      for (PromptCondition c : conds) {
        row.push_back(per_cond.at(c));
      }
      grid.push_back(std::move(row));
    }
    result = anova_to_json(repeated_measures_anova(grid));
    result["subjects"] = grid.size();
    result["conditions"] = conds.size();
  } else if (opts.test == "cohens-d") {
    auto a = condition_from_string(opts.cond_a);
    auto b = condition_from_string(opts.cond_b);
    if (!a || !b) {
      throw ValidationError("unknown condition for --a/--b");
    }
    std::vector<double> xs = defined_iers(cells, *a);
    std::vector<double> ys = defined_iers(cells, *b);
    EffectSize es = cohens_d(xs, ys);
    result = {{"cohens_d", es.cohens_d},
              {"pooled_sd", es.pooled_sd},
              {"n_a", xs.size()},
              {"n_b", ys.size()},
              {"a", opts.cond_a},
              {"b", opts.cond_b}};
  } else if (opts.test == "ols") {
    std::vector<std::pair<double, double>> pairs;
    for (const ScoredCell& c : cells) {
      if (c.ier.value) {
        pairs.emplace_back(*c.ier.value, c.sps.value);
      }
    }
    OlsFit fit = regress_sps_on_ier(pairs);
    result = {{"beta", fit.beta},
              {"intercept", fit.intercept},
              {"r_squared", fit.r_squared},
              {"n", pairs.size()}};
  } else if (opts.test == "judge-agreement") {
    AgreementReport rep = judge_agreement(cells);
    result = {{"n", rep.n}, {"agreements", rep.agreements}, {"percent", rep.percent}};
  } else {
    throw ValidationError("unknown test \"" + opts.test + "\"");
  }

  result["test"] = opts.test;
  emit(result.dump(2) + "\n", opts.out_path);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ghostmark: measures erasure of World-English cultural markers by LLM rewrites"};
  app.require_subcommand(1);

  AnnotateOpts annotate_opts;
  CLI::App* annotate = app.add_subcommand("annotate", "Detect markers across a corpus");
  annotate->add_option("--lexicon", annotate_opts.lexicon_path, "Marker lexicon JSON")
      ->required();
  annotate->add_option("--corpus", annotate_opts.corpus_path, "Corpus JSONL")->required();
  annotate->add_option("--out", annotate_opts.out_path, "Write detection JSONL here");
  annotate->add_option("--format", annotate_opts.format, "Summary format")
      ->check(CLI::IsMember({"text", "csv", "json"}));

  RunOpts run_opts;
  CLI::App* run = app.add_subcommand("run", "Execute the rewrite experiment");
  run->add_option("--config", run_opts.config_path, "Experiment config JSON")->required();
  run->add_option("--out", run_opts.out_dir, "Override the config's output directory");
  run->add_option("--max-in-flight", run_opts.max_in_flight, "Concurrent request cap");
  run->add_option("--seed", run_opts.seed, "Override the generation seed");
  run->add_flag("--mock", run_opts.mock, "Use the built-in echo endpoint (offline)");
  run->add_option("--mock-latency-ms", run_opts.mock_latency_ms,
                  "Per-request delay of the mock endpoint");

  ReportOpts report_opts;
  CLI::App* report = app.add_subcommand("report", "Aggregate scored cells into tables");
  report->add_option("--cells", report_opts.cells_path, "Scored-cells JSONL")->required();
  report->add_option("--lexicon", report_opts.lexicon_path, "Marker lexicon JSON")->required();
  report->add_option("--out", report_opts.out_dir, "Write one file per table here");
  report->add_option("--format", report_opts.format, "Output format")
      ->check(CLI::IsMember({"text", "csv", "json"}));
  report->add_option("--table", report_opts.table, "Which table")
      ->check(CLI::IsMember({"all", "model", "category", "prompt", "modes", "scatter"}));
  report->add_option("--condition", report_opts.condition,
                     "Condition for the model/category tables")
      ->check(CLI::IsMember({"Baseline", "Neutral", "Preservation"}));

  RewriteOpts rewrite_opts;
  CLI::App* rewrite = app.add_subcommand("rewrite", "Constraint-aware single-text rewrite");
  rewrite->add_option("--config", rewrite_opts.config_path, "Experiment config JSON")
      ->required();
  rewrite->add_option("--lexicon", rewrite_opts.lexicon_path,
                      "Marker lexicon JSON (defaults to the config's)");
  rewrite->add_option("--text", rewrite_opts.text, "Text to rewrite")->required();
  rewrite->add_option("--variety", rewrite_opts.variety, "Variety of the input text")
      ->check(CLI::IsMember(
          {"IndianEnglish", "SingaporeanEnglish", "NigerianEnglish", "AmericanEnglish"}));
  rewrite->add_option("--condition", rewrite_opts.condition, "Prompt condition")
      ->check(CLI::IsMember({"Baseline", "Neutral", "Preservation"}));
  rewrite->add_option("--model", rewrite_opts.model_id,
                      "Model id from the config (default: first)");
  rewrite->add_option("--out", rewrite_opts.out_path, "Write audit JSON here");
  rewrite->add_flag("--constraints,!--no-constraints", rewrite_opts.constraints,
                    "Enforce marker retention constraints");
  rewrite->add_option("--rounds", rewrite_opts.rounds, "Max constraint rounds")
      ->check(CLI::PositiveNumber);
  rewrite->add_option("--k", rewrite_opts.k, "Candidates per round");
  rewrite->add_option("--seed", rewrite_opts.seed, "Override the generation seed");
  rewrite->add_option("--ier-weight", rewrite_opts.ier_weight,
                      "Weight of IER in the combined score");
  rewrite->add_flag("--mock", rewrite_opts.mock, "Use the built-in echo endpoint (offline)");
  rewrite->add_option("--mock-latency-ms", rewrite_opts.mock_latency_ms,
                      "Per-request delay of the mock endpoint");

  StatsOpts stats_opts;
  CLI::App* stats = app.add_subcommand("stats", "Statistical tests over scored cells");
  stats->add_option("--cells", stats_opts.cells_path, "Scored-cells JSONL")->required();
  stats->add_option("--test", stats_opts.test, "Which test")
      ->required()
      ->check(CLI::IsMember(
          {"model-anova", "prompt-anova", "cohens-d", "ols", "judge-agreement"}));
  stats->add_option("--condition", stats_opts.condition, "Condition for model-anova")
      ->check(CLI::IsMember({"Baseline", "Neutral", "Preservation"}));
  stats->add_option("--a", stats_opts.cond_a, "First condition for cohens-d")
      ->check(CLI::IsMember({"Baseline", "Neutral", "Preservation"}));
  stats->add_option("--b", stats_opts.cond_b, "Second condition for cohens-d")
      ->check(CLI::IsMember({"Baseline", "Neutral", "Preservation"}));
  stats->add_option("--out", stats_opts.out_path, "Write result JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (annotate->parsed()) {
    return guarded([&] { return cmd_annotate(annotate_opts); });
  }
  if (run->parsed()) {
    return guarded([&] { return cmd_run(run_opts); });
  }
  if (report->parsed()) {
    return guarded([&] { return cmd_report(report_opts); });
  }
  if (rewrite->parsed()) {
    return guarded([&] { return cmd_rewrite(rewrite_opts); });
  }
  if (stats->parsed()) {
    return guarded([&] { return cmd_stats(stats_opts); });
  }
  return kExitUsage;
}
