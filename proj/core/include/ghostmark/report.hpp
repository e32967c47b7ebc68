#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ghostmark/lexicon.hpp"
#include "ghostmark/runner.hpp"

namespace ghostmark {

/// Absent values (e.g. an IER mean over zero defined cells) render as empty
/// in text/CSV and null in JSON.
using TableValue = std::variant<std::monostate, long, double, std::string>;

/// A rendered-agnostic results table: named columns, variant-typed rows.
/// Numeric cells print with four decimals in text/CSV; JSON keeps full
/// precision.
class AggregateTable {
 public:
  AggregateTable(std::string id, std::vector<std::string> columns);

  const std::string& id() const { return id_; }
  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<TableValue>>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  void add_row(std::vector<TableValue> row);
  std::size_t column_index(std::string_view name) const;
  const TableValue& at(std::size_t row, std::string_view column) const;

  /// Numeric cell as double; throws ValidationError for absent or
  /// non-numeric cells.
  double number_at(std::size_t row, std::string_view column) const;
  std::string text_at(std::size_t row, std::string_view column) const;

  /// Index of the row whose first column equals `key`; throws
  /// ValidationError when absent.
  std::size_t row_of(std::string_view key) const;

  std::string render_text() const;
  std::string render_csv() const;
  std::string render_json() const;

 private:
  std::string id_;
  std::vector<std::string> columns_;
  std::vector<std::vector<TableValue>> rows_;
};

enum class ReportFormat { Text, Csv, Json };

std::string render(const AggregateTable& table, ReportFormat format);

/// Per-model IER (defined cells only) and SPS (all cells) means and sample
/// SDs. Requires all cells to share one condition. Columns: model, n_ier,
/// ier_mean, ier_sd, n_sps, sps_mean, sps_sd; rows sorted by model id.
AggregateTable model_table(std::span<const ScoredCell> cells);

/// Per-category erasure counts over a single-condition cell set covering
/// every model for every text: instances (marker occurrences in originals),
/// possible = instances x model count, erased = occurrences whose mode is
/// not SurfacePreserved, rate_pct = 100 x erased / possible. Ends with a
/// total row.
AggregateTable category_table(std::span<const ScoredCell> cells, const Lexicon& lexicon);

/// Per-condition IER/SPS summary plus delta_ier_pct, the signed percent
/// change of each condition's IER mean relative to baseline. Requires all
/// three conditions to be present.
AggregateTable prompt_table(std::span<const ScoredCell> cells);

/// Frequency of each ghosting mode across all original occurrences.
AggregateTable mode_table(std::span<const ScoredCell> cells);

/// One row per defined-IER cell: ier, sps, model, condition. CSV-ready plot
/// data; undefined-IER cells are excluded.
AggregateTable paradox_scatter(std::span<const ScoredCell> cells);

}  // namespace ghostmark
