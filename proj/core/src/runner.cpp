#include "ghostmark/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "ghostmark/errors.hpp"
#include "ghostmark/hashing.hpp"

namespace ghostmark {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError("cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error("cannot write " + tmp.string());
    }
    out << content;
    out.flush();
    if (!out) {
      throw Error("short write to " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

void reject_unknown_fields(const json& obj, std::initializer_list<std::string_view> allowed,
                           const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw ParseError(where + ": unknown field \"" + it.key() + "\"");
    }
  }
}

const json& require_field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ParseError(where + ": missing field \"" + std::string(key) + "\"");
  }
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require_field(obj, key, where);
  if (!v.is_string()) {
    throw ParseError(where + ": field \"" + std::string(key) + "\" must be a string");
  }
  return v.get<std::string>();
}

ModelEndpoint parse_endpoint(const json& j, const std::string& where) {
  if (!j.is_object()) {
    throw ParseError(where + " must be an object");
  }
  reject_unknown_fields(j, {"id", "base_url"}, where);
  ModelEndpoint ep;
  ep.id = require_string(j, "id", where);
  ep.base_url = require_string(j, "base_url", where);
  if (ep.id.empty() || ep.base_url.empty()) {
    throw ValidationError(where + ": id and base_url must be non-empty");
  }
  return ep;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b])) != 0) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])) != 0) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) {
    throw ParseError("config: top level must be an object");
  }
  reject_unknown_fields(doc,
                        {"corpus_path", "lexicon_path", "models", "conditions", "params",
                         "concurrency", "cache_dir", "output_dir", "api_key_env", "retry",
                         "embedding", "judge"},
                        "config");

  ExperimentConfig cfg;
  cfg.corpus_path = require_string(doc, "corpus_path", "config");
  cfg.lexicon_path = require_string(doc, "lexicon_path", "config");
  cfg.output_dir = require_string(doc, "output_dir", "config");

  const json& models = require_field(doc, "models", "config");
  if (!models.is_array() || models.empty()) {
    throw ValidationError("config: models must be a non-empty array");
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    cfg.models.push_back(parse_endpoint(models[i], "config: models[" + std::to_string(i) + "]"));
  }
  for (std::size_t i = 0; i < cfg.models.size(); ++i) {
    for (std::size_t j = i + 1; j < cfg.models.size(); ++j) {
      if (cfg.models[i].id == cfg.models[j].id) {
        throw ValidationError("config: duplicate model id \"" + cfg.models[i].id + "\"");
      }
    }
  }

  if (auto it = doc.find("conditions"); it != doc.end()) {
    if (!it->is_array() || it->empty()) {
      throw ValidationError("config: conditions must be a non-empty array");
    }
    for (const json& c : *it) {
      if (!c.is_string()) {
        throw ParseError("config: conditions entries must be strings");
      }
      auto cond = condition_from_string(c.get<std::string>());
      if (!cond) {
        throw ValidationError("config: unknown condition \"" + c.get<std::string>() + "\"");
      }
      if (std::find(cfg.conditions.begin(), cfg.conditions.end(), *cond) !=
          cfg.conditions.end()) {
        throw ValidationError("config: duplicate condition \"" + c.get<std::string>() + "\"");
      }
      cfg.conditions.push_back(*cond);
    }
  } else {
    cfg.conditions.assign(kAllConditions.begin(), kAllConditions.end());
  }

  if (auto it = doc.find("params"); it != doc.end()) {
    if (!it->is_object()) {
      throw ParseError("config: params must be an object");
    }
    reject_unknown_fields(*it, {"temperature", "top_p", "seed", "max_tokens", "k_candidates"},
                          "config: params");
    cfg.params.temperature = it->value("temperature", cfg.params.temperature);
    cfg.params.top_p = it->value("top_p", cfg.params.top_p);
    cfg.params.seed = it->value("seed", cfg.params.seed);
    cfg.params.max_tokens = it->value("max_tokens", cfg.params.max_tokens);
    cfg.params.k_candidates = it->value("k_candidates", cfg.params.k_candidates);
  }
  validate_params(cfg.params);

  if (auto it = doc.find("concurrency"); it != doc.end()) {
    if (!it->is_number_integer() || it->get<int>() < 1) {
      throw ValidationError("config: concurrency must be a positive integer");
    }
    cfg.concurrency = it->get<int>();
  }
  if (auto it = doc.find("cache_dir"); it != doc.end()) {
    if (!it->is_string()) {
      throw ParseError("config: cache_dir must be a string");
    }
    cfg.cache_dir = it->get<std::string>();
  }
  if (auto it = doc.find("api_key_env"); it != doc.end()) {
    if (!it->is_string() || it->get<std::string>().empty()) {
      throw ValidationError("config: api_key_env must be a non-empty string");
    }
    cfg.api_key_env = it->get<std::string>();
  }
  if (auto it = doc.find("retry"); it != doc.end()) {
    if (!it->is_object()) {
      throw ParseError("config: retry must be an object");
    }
    reject_unknown_fields(*it, {"max_attempts", "initial_backoff_ms"}, "config: retry");
    cfg.retry.max_attempts = it->value("max_attempts", cfg.retry.max_attempts);
    cfg.retry.initial_backoff_ms = it->value("initial_backoff_ms", cfg.retry.initial_backoff_ms);
    if (cfg.retry.max_attempts < 1 || cfg.retry.initial_backoff_ms < 0) {
      throw ValidationError("config: retry.max_attempts must be >= 1 and backoff >= 0");
    }
  }
  if (auto it = doc.find("embedding"); it != doc.end() && !it->is_null()) {
    if (!it->is_object()) {
      throw ParseError("config: embedding must be an object");
    }
    reject_unknown_fields(*it, {"id", "base_url", "dimension"}, "config: embedding");
    json ep = *it;
    if (auto dim = ep.find("dimension"); dim != ep.end()) {
      if (!dim->is_number_integer() || dim->get<int>() < 1) {
        throw ValidationError("config: embedding.dimension must be a positive integer");
      }
      cfg.embedding_dimension = dim->get<int>();
      ep.erase("dimension");
    }
    cfg.embedding = parse_endpoint(ep, "config: embedding");
  }
  if (auto it = doc.find("judge"); it != doc.end() && !it->is_null()) {
    cfg.judge = parse_endpoint(*it, "config: judge");
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  ExperimentConfig cfg = parse(read_file(path));
  // Relative data paths in a config resolve against the config file, not
  // the process working directory.
  std::filesystem::path base = path.parent_path();
  auto anchor = [&](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative()) {
      p = base / p;
    }
  };
  anchor(cfg.corpus_path);
  anchor(cfg.lexicon_path);
  anchor(cfg.cache_dir);
  anchor(cfg.output_dir);
  return cfg;
}

std::string ExperimentConfig::canonical_json() const {
  // Only fields that determine cell content participate in the hash.
  // Endpoints are identified by model id: the URL is transport detail, and
  // paths plus scheduling knobs (concurrency, retry, cache) do not change
  // results either.
  json j;
  json conds = json::array();
  for (PromptCondition c : conditions) {
    conds.push_back(std::string(to_string(c)));
  }
  std::sort(conds.begin(), conds.end());
  j["conditions"] = std::move(conds);
  json ms = json::array();
  for (const ModelEndpoint& m : models) {
    ms.push_back(m.id);
  }
  std::sort(ms.begin(), ms.end());
  j["models"] = std::move(ms);
  j["params"] = {{"k_candidates", params.k_candidates},
                 {"max_tokens", params.max_tokens},
                 {"seed", params.seed},
                 {"temperature", params.temperature},
                 {"top_p", params.top_p}};
  if (embedding) {
    json e = {{"id", embedding->id}};
    if (embedding_dimension) {
      e["dimension"] = *embedding_dimension;
    }
    j["embedding"] = std::move(e);
  } else {
    j["embedding"] = nullptr;
  }
  if (judge) {
    j["judge"] = json{{"id", judge->id}};
  } else {
    j["judge"] = nullptr;
  }
  return j.dump();
}

std::string_view to_string(CellStatus s) {
  switch (s) {
    case CellStatus::Pending:
      return "pending";
    case CellStatus::Completed:
      return "completed";
    case CellStatus::Failed:
      return "failed";
  }
  return "pending";
}

namespace {

CellStatus cell_status_from_string(std::string_view s) {
  if (s == "pending") return CellStatus::Pending;
  if (s == "completed") return CellStatus::Completed;
  if (s == "failed") return CellStatus::Failed;
  throw ParseError("manifest: unknown cell status \"" + std::string(s) + "\"");
}

}  // namespace

std::size_t ExperimentManifest::count(CellStatus s) const {
  return static_cast<std::size_t>(
      std::count_if(cells.begin(), cells.end(),
                    [s](const CellState& c) { return c.status == s; }));
}

std::string ExperimentManifest::serialize() const {
  json j;
  j["config_hash"] = config_hash;
  j["corpus_hash"] = corpus_hash;
  j["lexicon_version"] = lexicon_version;
  j["expected"] = cells.size();
  json mids = json::array();
  for (const std::string& m : model_ids) mids.push_back(m);
  j["model_ids"] = std::move(mids);
  json conds = json::array();
  for (PromptCondition c : conditions) conds.push_back(std::string(to_string(c)));
  j["conditions"] = std::move(conds);
  json cs = json::array();
  for (const CellState& c : cells) {
    json jc = {{"condition", std::string(to_string(c.key.condition))},
               {"model_id", c.key.model_id},
               {"status", std::string(to_string(c.status))},
               {"text_id", c.key.text_id}};
    if (!c.error.empty()) {
      jc["error"] = c.error;
    }
    cs.push_back(std::move(jc));
  }
  j["cells"] = std::move(cs);
  return j.dump(2) + "\n";
}

ExperimentManifest ExperimentManifest::parse(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) {
    throw ParseError("manifest: top level must be an object");
  }
  reject_unknown_fields(
      doc, {"config_hash", "corpus_hash", "lexicon_version", "expected", "model_ids",
            "conditions", "cells"},
      "manifest");
  ExperimentManifest m;
  m.config_hash = require_string(doc, "config_hash", "manifest");
  m.corpus_hash = require_string(doc, "corpus_hash", "manifest");
  m.lexicon_version = require_string(doc, "lexicon_version", "manifest");
  const json& mids = require_field(doc, "model_ids", "manifest");
  const json& conds = require_field(doc, "conditions", "manifest");
  const json& cells = require_field(doc, "cells", "manifest");
  if (!mids.is_array() || !conds.is_array() || !cells.is_array()) {
    throw ParseError("manifest: model_ids, conditions and cells must be arrays");
  }
  for (const json& v : mids) {
    if (!v.is_string()) {
      throw ParseError("manifest: model_ids entries must be strings");
    }
    m.model_ids.push_back(v.get<std::string>());
  }
  for (const json& v : conds) {
    if (!v.is_string()) {
      throw ParseError("manifest: conditions entries must be strings");
    }
    auto c = condition_from_string(v.get<std::string>());
    if (!c) {
      throw ParseError("manifest: unknown condition \"" + v.get<std::string>() + "\"");
    }
    m.conditions.push_back(*c);
  }
  for (const json& jc : cells) {
    if (!jc.is_object()) {
      throw ParseError("manifest: cells entries must be objects");
    }
    reject_unknown_fields(jc, {"condition", "model_id", "status", "text_id", "error"},
                          "manifest: cell");
    CellState c;
    c.key.text_id = require_string(jc, "text_id", "manifest: cell");
    c.key.model_id = require_string(jc, "model_id", "manifest: cell");
    auto cond = condition_from_string(require_string(jc, "condition", "manifest: cell"));
    if (!cond) {
      throw ParseError("manifest: cell has unknown condition");
    }
    c.key.condition = *cond;
    c.status = cell_status_from_string(require_string(jc, "status", "manifest: cell"));
    c.error = jc.value("error", "");
    m.cells.push_back(std::move(c));
  }
  if (auto it = doc.find("expected"); it != doc.end()) {
    if (!it->is_number_integer() && !it->is_number_unsigned()) {
      throw ParseError("manifest: expected must be an integer");
    }
    if (it->get<std::size_t>() != m.cells.size()) {
      throw ValidationError("manifest: expected count disagrees with cell list");
    }
  }
  return m;
}

std::string_view to_string(JudgeLabel::Verdict v) {
  return v == JudgeLabel::Verdict::Preserved ? "preserved" : "erased";
}

std::string ScoredCell::to_json_line() const {
  json j;
  j["text_id"] = text_id;
  j["model_id"] = model_id;
  j["condition"] = std::string(to_string(condition));
  j["output_text"] = output_text;
  j["m_original"] = m_original;
  j["m_output"] = m_output;
  if (ier.value) {
    j["ier"] = {{"raw_delta", ier.raw_delta}, {"value", *ier.value}};
  } else {
    j["ier"] = {{"raw_delta", ier.raw_delta}, {"value", nullptr}};
  }
  j["sps"] = {{"dimension", sps.dimension},
              {"provider_id", sps.provider_id},
              {"value", sps.value}};
  json ms = json::array();
  for (const auto& [marker_id, mode] : modes) {
    ms.push_back({{"marker_id", marker_id}, {"mode", std::string(to_string(mode))}});
  }
  j["modes"] = std::move(ms);
  if (judge) {
    j["judge"] = {{"rationale", judge->rationale},
                  {"verdict", std::string(to_string(judge->verdict))}};
  } else {
    j["judge"] = nullptr;
  }
  return j.dump();
}

namespace {

ScoredCell parse_cell_object(const json& doc) {
  reject_unknown_fields(doc,
                        {"text_id", "model_id", "condition", "output_text", "m_original",
                         "m_output", "ier", "sps", "modes", "judge"},
                        "cell");
  ScoredCell c;
  c.text_id = require_string(doc, "text_id", "cell");
  c.model_id = require_string(doc, "model_id", "cell");
  auto cond = condition_from_string(require_string(doc, "condition", "cell"));
  if (!cond) {
    throw ParseError("cell: unknown condition");
  }
  c.condition = *cond;
  c.output_text = require_string(doc, "output_text", "cell");
  const json& morig = require_field(doc, "m_original", "cell");
  const json& mout = require_field(doc, "m_output", "cell");
  if (!morig.is_number_integer() || !mout.is_number_integer()) {
    throw ParseError("cell: m_original / m_output must be integers");
  }
  c.m_original = morig.get<long>();
  c.m_output = mout.get<long>();

  const json& ier = require_field(doc, "ier", "cell");
  reject_unknown_fields(ier, {"raw_delta", "value"}, "cell: ier");
  c.ier.raw_delta = require_field(ier, "raw_delta", "cell: ier").get<long>();
  const json& iv = require_field(ier, "value", "cell: ier");
  if (!iv.is_null()) {
    c.ier.value = iv.get<double>();
  }

  const json& sps = require_field(doc, "sps", "cell");
  reject_unknown_fields(sps, {"dimension", "provider_id", "value"}, "cell: sps");
  c.sps.dimension = require_field(sps, "dimension", "cell: sps").get<int>();
  c.sps.provider_id = require_string(sps, "provider_id", "cell: sps");
  c.sps.value = require_field(sps, "value", "cell: sps").get<double>();

  const json& modes = require_field(doc, "modes", "cell");
  if (!modes.is_array()) {
    throw ParseError("cell: modes must be an array");
  }
  for (const json& jm : modes) {
    reject_unknown_fields(jm, {"marker_id", "mode"}, "cell: mode");
    auto mode = ghosting_mode_from_string(require_string(jm, "mode", "cell: mode"));
    if (!mode) {
      throw ParseError("cell: unknown ghosting mode");
    }
    c.modes.emplace_back(require_string(jm, "marker_id", "cell: mode"), *mode);
  }
  if (static_cast<long>(c.modes.size()) != c.m_original) {
    throw ValidationError("cell: modes list must cover every original occurrence");
  }

  const json& judge = require_field(doc, "judge", "cell");
  if (!judge.is_null()) {
    reject_unknown_fields(judge, {"rationale", "verdict"}, "cell: judge");
    JudgeLabel label;
    std::string v = require_string(judge, "verdict", "cell: judge");
    if (v == "preserved") {
      label.verdict = JudgeLabel::Verdict::Preserved;
    } else if (v == "erased") {
      label.verdict = JudgeLabel::Verdict::Erased;
    } else {
      throw ParseError("cell: unknown judge verdict \"" + v + "\"");
    }
    label.rationale = require_string(judge, "rationale", "cell: judge");
    c.judge = std::move(label);
  }
  return c;
}

}  // namespace

ScoredCell ScoredCell::from_json_line(std::string_view line) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("cell: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) {
    throw ParseError("cell: line must be an object");
  }
  try {
    return parse_cell_object(doc);
  } catch (const json::exception& e) {
    throw ParseError(std::string("cell: malformed field: ") + e.what());
  }
}

std::vector<ScoredCell> load_scored_cells(const std::filesystem::path& path) {
  std::string content = read_file(path);
  std::vector<ScoredCell> cells;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t nl = content.find('\n', pos);
    std::string_view line(content.data() + pos,
                          (nl == std::string::npos ? content.size() : nl) - pos);
    pos = (nl == std::string::npos) ? content.size() : nl + 1;
    ++line_no;
    if (line.empty()) {
      continue;
    }
    try {
      cells.push_back(ScoredCell::from_json_line(line));
    } catch (const Error& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cells;
}

ExperimentManifest plan_experiment(const Corpus& marked_corpus, const Lexicon& lexicon,
                                   const ExperimentConfig& config) {
  ExperimentManifest m;
  m.config_hash = sha256_hex(config.canonical_json());
  m.corpus_hash = sha256_hex(marked_corpus.serialize());
  m.lexicon_version = lexicon.version();
  for (const ModelEndpoint& ep : config.models) {
    m.model_ids.push_back(ep.id);
  }
  std::sort(m.model_ids.begin(), m.model_ids.end());
  m.conditions = config.conditions;
  std::sort(m.conditions.begin(), m.conditions.end());
  for (const TextRecord& r : marked_corpus.records()) {
    for (const std::string& model_id : m.model_ids) {
      for (PromptCondition cond : m.conditions) {
        m.cells.push_back(CellState{{r.id, model_id, cond}, CellStatus::Pending, ""});
      }
    }
  }
  std::sort(m.cells.begin(), m.cells.end(),
            [](const CellState& a, const CellState& b) { return a.key < b.key; });
  return m;
}

JudgeLabel judge_preservation(const std::string& original, const std::string& output,
                              const GenerationClient& judge_client,
                              const std::string& judge_model, const GenerationParams& params) {
  WireRequest req;
  req.model_id = judge_model;
  req.condition = PromptCondition::Baseline;
  req.instruction =
      "You are auditing a text rewrite. Compare the ORIGINAL and the REWRITE. "
      "Decide whether the rewrite keeps the original's culturally specific words "
      "and phrasings, or replaces/removes them. Your first line must read exactly "
      "VERDICT: PRESERVED or VERDICT: ERASED, followed by a brief rationale.";
  req.user_text = "ORIGINAL:\n" + original + "\n\nREWRITE:\n" + output;
  req.params = params;
  GenerationRecord rec = judge_client.generate(req);
  if (rec.outputs.empty()) {
    throw ParseError("judge: empty reply");
  }
  const std::string& reply = rec.outputs.front();

  std::size_t at = reply.find("VERDICT:");
  if (at == std::string::npos) {
    throw ParseError("judge: reply has no VERDICT line");
  }
  std::size_t val_start = at + std::string_view("VERDICT:").size();
  std::size_t val_end = reply.find('\n', val_start);
  bool has_tail = val_end != std::string::npos;
  if (!has_tail) {
    val_end = reply.size();
  }
  std::string verdict = trim(reply.substr(val_start, val_end - val_start));
  while (!verdict.empty() && (verdict.back() == '.' || verdict.back() == '!')) {
    verdict.pop_back();
  }
  JudgeLabel label;
  if (verdict == "PRESERVED") {
    label.verdict = JudgeLabel::Verdict::Preserved;
  } else if (verdict == "ERASED") {
    label.verdict = JudgeLabel::Verdict::Erased;
  } else {
    throw ParseError("judge: unrecognized verdict \"" + verdict + "\"");
  }
  std::string before = trim(reply.substr(0, at));
  std::string after = has_tail ? trim(reply.substr(val_end + 1)) : std::string();
  label.rationale = after.empty() ? before : after;
  return label;
}

AgreementReport judge_agreement(std::span<const ScoredCell> cells) {
  AgreementReport rep;
  for (const ScoredCell& c : cells) {
    if (!c.judge || !c.ier.value) {
      continue;
    }
    bool detector_erased = *c.ier.value > 0.0;
    bool judge_erased = c.judge->verdict == JudgeLabel::Verdict::Erased;
    ++rep.n;
    if (detector_erased == judge_erased) {
      ++rep.agreements;
    }
  }
  if (rep.n > 0) {
    rep.percent = 100.0 * static_cast<double>(rep.agreements) / static_cast<double>(rep.n);
  }
  return rep;
}

ExperimentRunner::ExperimentRunner(ExperimentConfig config)
    : config_(std::move(config)),
      lexicon_(load_lexicon(config_.lexicon_path)),
      marked_(filter_marked(ingest(config_.corpus_path), lexicon_)) {
  for (const TextRecord& r : marked_.records()) {
    DetectionResult d = detect(r.text, lexicon_, VarietyFilter{{r.variety}});
    d.text_id = r.id;
    original_detections_.emplace(r.id, std::move(d));
  }
}

ExperimentManifest ExperimentRunner::plan() const {
  return plan_experiment(marked_, lexicon_, config_);
}

ExperimentRunner::Outcome ExperimentRunner::execute() {
  namespace fs = std::filesystem;
  Outcome out;
  out.manifest = plan();
  fs::create_directories(config_.output_dir);
  out.cells_path = config_.output_dir / "cells.jsonl";
  out.manifest_path = config_.output_dir / "manifest.json";
  fs::path journal_path = config_.output_dir / "cells.journal.jsonl";

  if (fs::exists(out.manifest_path)) {
    ExperimentManifest prev = ExperimentManifest::parse(read_file(out.manifest_path));
    if (prev.config_hash != out.manifest.config_hash ||
        prev.corpus_hash != out.manifest.corpus_hash) {
      throw ValidationError("output dir " + config_.output_dir.string() +
                            " holds results for different inputs; use a fresh directory");
    }
  }

  // Completed work survives in the final file and/or the journal. A killed
  // run may leave a truncated journal tail; drop from the first bad line.
  std::map<CellKey, ScoredCell> done;
  if (fs::exists(out.cells_path)) {
    for (ScoredCell& c : load_scored_cells(out.cells_path)) {
      CellKey k = c.key();
      done.emplace(std::move(k), std::move(c));
    }
  }
  if (fs::exists(journal_path)) {
    std::string content = read_file(journal_path);
    std::size_t pos = 0;
    while (pos < content.size()) {
      std::size_t nl = content.find('\n', pos);
      if (nl == std::string::npos) {
        break;  // no trailing newline: interrupted mid-write
      }
      std::string_view line(content.data() + pos, nl - pos);
      pos = nl + 1;
      if (line.empty()) {
        continue;
      }
      try {
        ScoredCell c = ScoredCell::from_json_line(line);
        CellKey k = c.key();
        done.emplace(std::move(k), std::move(c));
      } catch (const Error&) {
        break;
      }
    }
  }
  std::set<CellKey> planned;
  for (const CellState& c : out.manifest.cells) {
    planned.insert(c.key);
  }
  std::erase_if(done, [&](const auto& kv) { return !planned.contains(kv.first); });
  out.resumed = done.size();

  std::vector<CellKey> pending;
  for (const CellState& c : out.manifest.cells) {
    if (!done.contains(c.key)) {
      pending.push_back(c.key);
    }
  }

  const char* key_env = std::getenv(config_.api_key_env.c_str());
  std::string api_key = key_env ? key_env : "";
  ResponseCache cache;
  if (!config_.cache_dir.empty()) {
    cache = ResponseCache(config_.cache_dir);
  }
  const ResponseCache* cache_ptr = cache.enabled() ? &cache : nullptr;

  std::map<std::string, GenerationClient> clients;
  for (const ModelEndpoint& ep : config_.models) {
    clients.emplace(ep.id, GenerationClient(ep.base_url, api_key, config_.retry, cache_ptr));
  }
  std::unique_ptr<EmbeddingProvider> provider;
  if (config_.embedding) {
    provider = std::make_unique<RemoteEmbeddingProvider>(
        EmbeddingClient(config_.embedding->base_url, config_.embedding->id, api_key,
                        config_.retry, cache_ptr),
        config_.embedding_dimension);
  } else {
    provider = std::make_unique<NgramHashProvider>();
  }
  std::optional<GenerationClient> judge_client;
  if (config_.judge) {
    judge_client.emplace(config_.judge->base_url, api_key, config_.retry, cache_ptr);
  }
  GenerationParams judge_params = config_.params;
  judge_params.temperature = 0.0;  // judging should not sample
  judge_params.k_candidates = 1;

  std::ofstream journal(journal_path, std::ios::binary | std::ios::app);
  if (!journal) {
    throw Error("cannot open journal " + journal_path.string());
  }
  std::mutex journal_mutex;
  std::vector<std::optional<ScoredCell>> results(pending.size());
  std::vector<std::string> errors(pending.size());
  std::atomic<std::size_t> next{0};

  auto score_one = [&](const CellKey& key) {
    const TextRecord* record = marked_.find(key.text_id);
    const DetectionResult& orig = original_detections_.at(key.text_id);
    const GenerationClient& client = clients.at(key.model_id);

    WireRequest req = build_request(*record, key.condition, config_.params, key.model_id);
    GenerationRecord rec = client.generate(req);
    if (rec.outputs.empty()) {
      throw RemoteError("model returned no choices");
    }
    const std::string& output = rec.outputs.front();

    ScoredCell cell;
    cell.text_id = key.text_id;
    cell.model_id = key.model_id;
    cell.condition = key.condition;
    cell.output_text = output;
    DetectionResult out_det = detect(output, lexicon_, VarietyFilter{{record->variety}});
    cell.m_original = static_cast<long>(orig.occurrences.size());
    cell.m_output = static_cast<long>(out_det.occurrences.size());
    cell.ier = compute_ier(cell.m_original, cell.m_output);
    cell.sps = compute_sps(record->text, output, *provider);
    for (const ModeAssignment& a :
         classify_modes(orig.occurrences, record->text, output, lexicon_)) {
      cell.modes.emplace_back(a.occurrence.marker_id, a.mode);
    }
    if (judge_client) {
      cell.judge = judge_preservation(record->text, output, *judge_client,
                                      config_.judge->id, judge_params);
    }
    return cell;
  };

  auto worker = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) {
        return;
      }
      try {
        ScoredCell cell = score_one(pending[i]);
        {
          std::lock_guard lock(journal_mutex);
          journal << cell.to_json_line() << '\n';
          journal.flush();
        }
        results[i] = std::move(cell);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        if (errors[i].empty()) {
          errors[i] = "unknown error";
        }
      }
    }
  };

  std::size_t n_threads = std::min<std::size_t>(
      static_cast<std::size_t>(config_.concurrency), std::max<std::size_t>(pending.size(), 1));
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    threads.emplace_back(worker);
  }
  for (std::thread& t : threads) {
    t.join();
  }
  journal.close();

  std::map<CellKey, std::string> failures;
  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (results[i]) {
      ++out.newly_completed;
      CellKey k = results[i]->key();
      done.emplace(std::move(k), std::move(*results[i]));
    } else {
      ++out.failed;
      failures.emplace(pending[i], errors[i]);
    }
  }

  for (CellState& c : out.manifest.cells) {
    if (done.contains(c.key)) {
      c.status = CellStatus::Completed;
      c.error.clear();
    } else if (auto it = failures.find(c.key); it != failures.end()) {
      c.status = CellStatus::Failed;
      c.error = it->second;
    }
  }

  // done is keyed by CellKey, so iteration order is the manifest sort order;
  // the final file is byte-deterministic given identical cell content.
  std::string cells_blob;
  for (const auto& [key, cell] : done) {
    cells_blob += cell.to_json_line();
    cells_blob += '\n';
  }
  write_file_atomic(out.cells_path, cells_blob);
  fs::remove(journal_path);  // subsumed by cells.jsonl
  write_file_atomic(out.manifest_path, out.manifest.serialize());
  return out;
}

}  // namespace ghostmark
