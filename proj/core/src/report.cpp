#include "ghostmark/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "ghostmark/errors.hpp"

namespace ghostmark {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string value_to_text(const TableValue& v) {
  if (std::holds_alternative<std::monostate>(v)) {
    return "";
  }
  if (const long* l = std::get_if<long>(&v)) {
    return std::to_string(*l);
  }
  if (const double* d = std::get_if<double>(&v)) {
    return format_double(*d);
  }
  return std::get<std::string>(v);
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) {
    return field;
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') {
      out += "\"\"";
    } else {
      out += c;
    }
  }
  out += '"';
  return out;
}

struct RunningStats {
  std::size_t n = 0;
  double sum = 0.0;
  double sumsq = 0.0;

  void add(double x) {
    ++n;
    sum += x;
    sumsq += x * x;
  }
  double mean() const { return sum / static_cast<double>(n); }
  // Sample SD (n-1); requires n >= 2.
  double sd() const {
    double m = mean();
    double var = (sumsq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
    return std::sqrt(std::max(var, 0.0));
  }
};

void push_mean_sd(std::vector<TableValue>& row, const RunningStats& s) {
  if (s.n == 0) {
    row.emplace_back(std::monostate{});
    row.emplace_back(std::monostate{});
  } else if (s.n == 1) {
    row.emplace_back(s.mean());
    row.emplace_back(std::monostate{});
  } else {
    row.emplace_back(s.mean());
    row.emplace_back(s.sd());
  }
}

void require_single_condition(std::span<const ScoredCell> cells, const char* table) {
  std::set<PromptCondition> conds;
  for (const ScoredCell& c : cells) {
    conds.insert(c.condition);
  }
  if (conds.size() > 1) {
    throw ValidationError(std::string(table) + ": cells must come from a single condition");
  }
}

}  // namespace

AggregateTable::AggregateTable(std::string id, std::vector<std::string> columns)
    : id_(std::move(id)), columns_(std::move(columns)) {
  if (columns_.empty()) {
    throw ValidationError("table: needs at least one column");
  }
}

void AggregateTable::add_row(std::vector<TableValue> row) {
  if (row.size() != columns_.size()) {
    throw ValidationError("table " + id_ + ": row width " + std::to_string(row.size()) +
                          " != column count " + std::to_string(columns_.size()));
  }
  rows_.push_back(std::move(row));
}

std::size_t AggregateTable::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i] == name) {
      return i;
    }
  }
  throw ValidationError("table " + id_ + ": no column \"" + std::string(name) + "\"");
}

const TableValue& AggregateTable::at(std::size_t row, std::string_view column) const {
  if (row >= rows_.size()) {
    throw ValidationError("table " + id_ + ": row " + std::to_string(row) + " out of range");
  }
  return rows_[row][column_index(column)];
}

double AggregateTable::number_at(std::size_t row, std::string_view column) const {
  const TableValue& v = at(row, column);
  if (const double* d = std::get_if<double>(&v)) {
    return *d;
  }
  if (const long* l = std::get_if<long>(&v)) {
    return static_cast<double>(*l);
  }
  throw ValidationError("table " + id_ + ": cell (" + std::to_string(row) + ", " +
                        std::string(column) + ") is not numeric");
}

std::string AggregateTable::text_at(std::size_t row, std::string_view column) const {
  return value_to_text(at(row, column));
}

std::size_t AggregateTable::row_of(std::string_view key) const {
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (const std::string* s = std::get_if<std::string>(&rows_[i][0]); s && *s == key) {
      return i;
    }
  }
  throw ValidationError("table " + id_ + ": no row keyed \"" + std::string(key) + "\"");
}

std::string AggregateTable::render_text() const {
  std::vector<std::size_t> widths(columns_.size());
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    widths[i] = columns_[i].size();
  }
  std::vector<std::vector<std::string>> cells;
  cells.reserve(rows_.size());
  for (const auto& row : rows_) {
    std::vector<std::string> line;
    line.reserve(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) {
      line.push_back(value_to_text(row[i]));
      widths[i] = std::max(widths[i], line.back().size());
    }
    cells.push_back(std::move(line));
  }
  std::string out;
  auto append_row = [&](const std::vector<std::string>& line) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i > 0) {
        out += "  ";
      }
      out += line[i];
      out.append(widths[i] - line[i].size(), ' ');
    }
    while (!out.empty() && out.back() == ' ') {
      out.pop_back();
    }
    out += '\n';
  };
  append_row(columns_);
  std::string rule;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i > 0) {
      rule += "  ";
    }
    rule.append(widths[i], '-');
  }
  out += rule + "\n";
  for (const auto& line : cells) {
    append_row(line);
  }
  return out;
}

std::string AggregateTable::render_csv() const {
  std::string out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i > 0) {
      out += ',';
    }
    out += csv_escape(columns_[i]);
  }
  out += '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) {
        out += ',';
      }
      out += csv_escape(value_to_text(row[i]));
    }
    out += '\n';
  }
  return out;
}

std::string AggregateTable::render_json() const {
  nlohmann::json j;
  j["id"] = id_;
  j["columns"] = columns_;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : rows_) {
    nlohmann::json jr;
    for (std::size_t i = 0; i < row.size(); ++i) {
      const TableValue& v = row[i];
      if (std::holds_alternative<std::monostate>(v)) {
        jr[columns_[i]] = nullptr;
      } else if (const long* l = std::get_if<long>(&v)) {
        jr[columns_[i]] = *l;
      } else if (const double* d = std::get_if<double>(&v)) {
        jr[columns_[i]] = *d;
      } else {
        jr[columns_[i]] = std::get<std::string>(v);
      }
    }
    rows.push_back(std::move(jr));
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

std::string render(const AggregateTable& table, ReportFormat format) {
  switch (format) {
    case ReportFormat::Text:
      return table.render_text();
    case ReportFormat::Csv:
      return table.render_csv();
    case ReportFormat::Json:
      return table.render_json();
  }
  return table.render_text();
}

AggregateTable model_table(std::span<const ScoredCell> cells) {
  require_single_condition(cells, "model_table");
  std::map<std::string, std::pair<RunningStats, RunningStats>> by_model;  // ier, sps
  for (const ScoredCell& c : cells) {
    auto& [ier, sps] = by_model[c.model_id];
    if (c.ier.value) {
      ier.add(*c.ier.value);
    }
    sps.add(c.sps.value);
  }
  AggregateTable table("model",
                       {"model", "n_ier", "ier_mean", "ier_sd", "n_sps", "sps_mean", "sps_sd"});
  for (const auto& [model, stats] : by_model) {
    const auto& [ier, sps] = stats;
    std::vector<TableValue> row;
    row.emplace_back(model);
    row.emplace_back(static_cast<long>(ier.n));
    push_mean_sd(row, ier);
    row.emplace_back(static_cast<long>(sps.n));
    push_mean_sd(row, sps);
    table.add_row(std::move(row));
  }
  return table;
}

AggregateTable category_table(std::span<const ScoredCell> cells, const Lexicon& lexicon) {
  require_single_condition(cells, "category_table");

  std::set<std::string> models;
  std::set<std::string> texts;
  std::map<std::string, const ScoredCell*> by_key;
  for (const ScoredCell& c : cells) {
    models.insert(c.model_id);
    texts.insert(c.text_id);
    std::string key = c.text_id + "\x1f" + c.model_id;
    if (!by_key.emplace(key, &c).second) {
      throw ValidationError("category_table: duplicate cell for text \"" + c.text_id +
                            "\", model \"" + c.model_id + "\"");
    }
  }
  for (const std::string& t : texts) {
    for (const std::string& m : models) {
      if (!by_key.contains(t + "\x1f" + m)) {
        throw ValidationError("category_table: text \"" + t + "\" missing model \"" + m +
                              "\"; every text needs every model");
      }
    }
  }

  auto category_of = [&](const std::string& marker_id) {
    const Marker* m = lexicon.find(marker_id);
    if (m == nullptr) {
      throw ValidationError("category_table: unknown marker id \"" + marker_id + "\"");
    }
    return m->category;
  };

  std::map<Category, long> instances;
  std::map<Category, long> erased;
  for (const std::string& t : texts) {
    // Instances are per original text; any model's cell carries the modes.
    const ScoredCell* first = by_key.at(t + "\x1f" + *models.begin());
    for (const auto& [marker_id, mode] : first->modes) {
      (void)mode;
      ++instances[category_of(marker_id)];
    }
  }
  for (const auto& [key, cell] : by_key) {
    for (const auto& [marker_id, mode] : cell->modes) {
      if (mode != GhostingMode::SurfacePreserved) {
        ++erased[category_of(marker_id)];
      }
    }
  }

  long n_models = static_cast<long>(models.size());
  AggregateTable table("category", {"category", "instances", "possible", "erased", "rate_pct"});
  long tot_inst = 0;
  long tot_poss = 0;
  long tot_erased = 0;
  for (Category c : kAllCategories) {
    long inst = instances[c];
    long poss = inst * n_models;
    long er = erased[c];
    tot_inst += inst;
    tot_poss += poss;
    tot_erased += er;
    std::vector<TableValue> row;
    row.emplace_back(std::string(to_string(c)));
    row.emplace_back(inst);
    row.emplace_back(poss);
    row.emplace_back(er);
    if (poss > 0) {
      row.emplace_back(100.0 * static_cast<double>(er) / static_cast<double>(poss));
    } else {
      row.emplace_back(std::monostate{});
    }
    table.add_row(std::move(row));
  }
  std::vector<TableValue> total;
  total.emplace_back(std::string("total"));
  total.emplace_back(tot_inst);
  total.emplace_back(tot_poss);
  total.emplace_back(tot_erased);
  if (tot_poss > 0) {
    total.emplace_back(100.0 * static_cast<double>(tot_erased) /
                       static_cast<double>(tot_poss));
  } else {
    total.emplace_back(std::monostate{});
  }
  table.add_row(std::move(total));
  return table;
}

AggregateTable prompt_table(std::span<const ScoredCell> cells) {
  std::map<PromptCondition, std::pair<RunningStats, RunningStats>> by_cond;
  for (const ScoredCell& c : cells) {
    auto& [ier, sps] = by_cond[c.condition];
    if (c.ier.value) {
      ier.add(*c.ier.value);
    }
    sps.add(c.sps.value);
  }
  for (PromptCondition c : kAllConditions) {
    if (!by_cond.contains(c)) {
      throw ValidationError("prompt_table: missing condition \"" +
                            std::string(to_string(c)) + "\"");
    }
  }

  const RunningStats& base_ier = by_cond.at(PromptCondition::Baseline).first;
  std::optional<double> base_mean;
  if (base_ier.n > 0) {
    base_mean = base_ier.mean();
  }

  AggregateTable table("prompt", {"condition", "n_ier", "ier_mean", "ier_sd", "n_sps",
                                  "sps_mean", "sps_sd", "delta_ier_pct"});
  for (PromptCondition c : kAllConditions) {
    const auto& [ier, sps] = by_cond.at(c);
    std::vector<TableValue> row;
    row.emplace_back(std::string(to_string(c)));
    row.emplace_back(static_cast<long>(ier.n));
    push_mean_sd(row, ier);
    row.emplace_back(static_cast<long>(sps.n));
    push_mean_sd(row, sps);
    if (ier.n > 0 && base_mean && *base_mean != 0.0) {
      row.emplace_back(100.0 * (ier.mean() - *base_mean) / *base_mean);
    } else {
      row.emplace_back(std::monostate{});
    }
    table.add_row(std::move(row));
  }
  return table;
}

AggregateTable mode_table(std::span<const ScoredCell> cells) {
  std::map<GhostingMode, long> counts;
  long total = 0;
  for (const ScoredCell& c : cells) {
    for (const auto& [marker_id, mode] : c.modes) {
      (void)marker_id;
      ++counts[mode];
      ++total;
    }
  }
  AggregateTable table("modes", {"mode", "count", "share_pct"});
  for (GhostingMode m : {GhostingMode::DirectRemoval, GhostingMode::ParaphrasticAssimilation,
                         GhostingMode::SurfacePreserved}) {
    std::vector<TableValue> row;
    row.emplace_back(std::string(to_string(m)));
    row.emplace_back(counts[m]);
    if (total > 0) {
      row.emplace_back(100.0 * static_cast<double>(counts[m]) / static_cast<double>(total));
    } else {
      row.emplace_back(std::monostate{});
    }
    table.add_row(std::move(row));
  }
  return table;
}

AggregateTable paradox_scatter(std::span<const ScoredCell> cells) {
  AggregateTable table("scatter", {"ier", "sps", "model", "condition"});
  for (const ScoredCell& c : cells) {
    if (!c.ier.value) {
      continue;
    }
    std::vector<TableValue> row;
    row.emplace_back(*c.ier.value);
    row.emplace_back(c.sps.value);
    row.emplace_back(c.model_id);
    row.emplace_back(std::string(to_string(c.condition)));
    table.add_row(std::move(row));
  }
  return table;
}

}  // namespace ghostmark
