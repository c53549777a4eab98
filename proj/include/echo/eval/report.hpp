#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "echo/eval/harness.hpp"

namespace echo {

// Scores are kept in hundredths of a percent so every printed digit is exact.
using Hundredths = std::int64_t;

// 100 * num / den rounded half-up to two decimals.
Hundredths percent_half_up(std::uint64_t num, std::uint64_t den);
std::string format_hundredths(Hundredths h);         // "75.00"
std::string format_delta(Hundredths h);              // "+1.25", "-3.00", "+0.00"

struct Cell {
  std::size_t correct = 0;
  std::size_t total = 0;
  std::uint64_t chance_units = 0;  // sum over items of kChanceScale / option_count

  static constexpr std::uint64_t kChanceScale = 2520;  // lcm(1..10)

  std::optional<Hundredths> accuracy() const;  // nullopt when empty
  std::optional<Hundredths> chance() const;    // mean of 100 / |options|
};

using CellKey = std::pair<std::string, QuestionType>;  // (dataset, subtask)

struct Report {
  std::string label;
  FormatMode format_mode = FormatMode::kMultipleChoice;
  std::vector<std::string> datasets;  // order of first appearance
  std::map<CellKey, Cell> cells;
  std::size_t items = 0;
  std::size_t parse_failures = 0;
  std::size_t item_errors = 0;

  const Cell* cell(const std::string& dataset, QuestionType subtask) const;
  // Equal-weight mean of the non-empty cells' exact ratios, rounded once at the end.
  std::optional<Hundredths> average() const;
  std::optional<Hundredths> chance_average() const;
};

Report score(const RunResult& result, std::string label = "run");

// Table-1 style: one column per (dataset, subtask) plus Average, a Random
// Chance row computed from the first report, one row per report.
std::string render_markdown(const std::vector<Report>& reports);
// setting,dataset,subtask,correct,total,accuracy,chance
std::string render_csv(const std::vector<Report>& reports);
std::string report_json(const std::vector<Report>& reports);

struct DeltaRow {
  std::string label;
  std::map<CellKey, std::optional<Hundredths>> cells;  // point minus baseline; nullopt when either is empty
  std::optional<Hundredths> average;
};

struct DeltaTable {
  std::string baseline;
  std::vector<std::string> datasets;
  std::vector<DeltaRow> rows;  // every report after the first
};

DeltaTable delta_table(const std::vector<Report>& reports);
std::string render_delta_markdown(const DeltaTable& table);

struct GridPoint {
  std::string label;
  RunConfig config;
};

// Cartesian product of the grid axes in the order format_mode, knowledge_mode,
// shots, shot_mode, ablation. An empty axis holds the base value, except that
// an ablation set outside the grid is compared against "none". The first
// point is the baseline. Labels name only the axes that vary.
std::vector<GridPoint> grid_points(const RunConfig& base);

struct GridResult {
  std::vector<GridPoint> points;
  std::vector<RunResult> runs;
  std::vector<Report> reports;
  DeltaTable deltas;
};

GridResult run_grid(const std::vector<BenchmarkItem>& items, const Pipeline& pipeline, const RunConfig& base);

}  // namespace echo
