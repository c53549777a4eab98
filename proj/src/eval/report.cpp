#include "echo/eval/report.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "echo/error.hpp"

namespace echo {

namespace {

using nlohmann::json;

std::vector<std::string> all_datasets(const std::vector<Report>& reports) {
  std::vector<std::string> out;
  for (const auto& r : reports) {
    for (const auto& d : r.datasets) {
      if (std::find(out.begin(), out.end(), d) == out.end()) out.push_back(d);
    }
  }
  return out;
}

std::string cell_text(const std::optional<Hundredths>& h) { return h ? format_hundredths(*h) : "-"; }
std::string delta_text(const std::optional<Hundredths>& h) { return h ? format_delta(*h) : "-"; }

std::string header_row(const std::vector<std::string>& datasets) {
  std::string out = "| Setting |";
  std::string rule = "|---|";
  for (const auto& d : datasets) {
    for (QuestionType q : kAllQuestionTypes) {
      out += " " + d + " " + std::string(to_string(q)) + " |";
      rule += "---:|";
    }
  }
  out += " Average |\n";
  rule += "---:|\n";
  return out + rule;
}

// Mean of per-cell fractions num_i / den_i, as hundredths of a percent,
// rounded half-up once. Long double keeps the sum exact far beyond any
// realistic benchmark size; the epsilon absorbs the last-bit error on exact halves.
std::optional<Hundredths> mean_of_ratios(const std::vector<std::pair<long double, long double>>& parts) {
  if (parts.empty()) return std::nullopt;
  long double sum = 0;
  for (const auto& [num, den] : parts) sum += num / den;
  const long double h = sum * 10000.0L / static_cast<long double>(parts.size());
  return static_cast<Hundredths>(std::floor(h + 0.5L + 1e-12L));
}

}  // namespace

Hundredths percent_half_up(std::uint64_t num, std::uint64_t den) {
  if (den == 0) throw Error(ErrorCode::kInvalidArgument, "percentage of an empty cell");
  // floor(10000 num / den + 1/2) without leaving integers.
  return static_cast<Hundredths>((20000 * num + den) / (2 * den));
}

std::string format_hundredths(Hundredths h) {
  const bool negative = h < 0;
  const std::uint64_t a = static_cast<std::uint64_t>(negative ? -h : h);
  std::string frac = std::to_string(a % 100);
  if (frac.size() < 2) frac = "0" + frac;
  return (negative ? "-" : "") + std::to_string(a / 100) + "." + frac;
}

std::string format_delta(Hundredths h) { return (h < 0 ? "" : "+") + format_hundredths(h); }

std::optional<Hundredths> Cell::accuracy() const {
  if (total == 0) return std::nullopt;
  return percent_half_up(correct, total);
}

std::optional<Hundredths> Cell::chance() const {
  if (total == 0) return std::nullopt;
  return percent_half_up(chance_units, std::uint64_t(total) * kChanceScale);
}

const Cell* Report::cell(const std::string& dataset, QuestionType subtask) const {
  auto it = cells.find({dataset, subtask});
  return it == cells.end() || it->second.total == 0 ? nullptr : &it->second;
}

std::optional<Hundredths> Report::average() const {
  std::vector<std::pair<long double, long double>> parts;
  for (const auto& [key, c] : cells) {
    if (c.total > 0) parts.emplace_back(c.correct, c.total);
  }
  return mean_of_ratios(parts);
}

std::optional<Hundredths> Report::chance_average() const {
  std::vector<std::pair<long double, long double>> parts;
  for (const auto& [key, c] : cells) {
    if (c.total > 0) parts.emplace_back(c.chance_units, static_cast<long double>(c.total) * Cell::kChanceScale);
  }
  return mean_of_ratios(parts);
}

Report score(const RunResult& result, std::string label) {
  Report r;
  r.label = std::move(label);
  r.format_mode = result.format_mode;
  for (const auto& rec : result.records) {
    if (std::find(r.datasets.begin(), r.datasets.end(), rec.dataset) == r.datasets.end()) r.datasets.push_back(rec.dataset);
    if (rec.option_count == 0 || Cell::kChanceScale % rec.option_count != 0) {
      throw Error(ErrorCode::kInvalidArgument, "record " + rec.item_id + " has an unsupported option count");
    }
    Cell& c = r.cells[{rec.dataset, rec.subtask}];
    ++c.total;
    c.correct += rec.correct ? 1 : 0;
    c.chance_units += Cell::kChanceScale / rec.option_count;
    ++r.items;
    r.parse_failures += rec.parse_status == ParseStatus::kParseFailure ? 1 : 0;
    r.item_errors += rec.note.empty() ? 0 : 1;
  }
  return r;
}

std::string render_markdown(const std::vector<Report>& reports) {
  const auto datasets = all_datasets(reports);
  std::string out = header_row(datasets);
  if (reports.empty()) return out;

  auto row = [&](const std::string& label, auto value_of, const std::optional<Hundredths>& average) {
    std::string line = "| " + label + " |";
    for (const auto& d : datasets) {
      for (QuestionType q : kAllQuestionTypes) line += " " + cell_text(value_of(d, q)) + " |";
    }
    return line + " " + cell_text(average) + " |\n";
  };
  const Report& first = reports.front();
  out += row(
      "Random Chance",
      [&](const std::string& d, QuestionType q) {
        const Cell* c = first.cell(d, q);
        return c ? c->chance() : std::nullopt;
      },
      first.chance_average());
  for (const auto& r : reports) {
    out += row(
        r.label,
        [&](const std::string& d, QuestionType q) {
          const Cell* c = r.cell(d, q);
          return c ? c->accuracy() : std::nullopt;
        },
        r.average());
  }
  return out;
}

std::string render_csv(const std::vector<Report>& reports) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
  };
  std::string out = "setting,dataset,subtask,correct,total,accuracy,chance\n";
  const auto datasets = all_datasets(reports);
  for (const auto& r : reports) {
    for (const auto& d : datasets) {
      for (QuestionType q : kAllQuestionTypes) {
        const Cell* c = r.cell(d, q);
        out += quote(r.label) + "," + quote(d) + "," + std::string(to_string(q)) + ",";
        out += c ? std::to_string(c->correct) + "," + std::to_string(c->total) : std::string("0,0");
        out += "," + cell_text(c ? c->accuracy() : std::nullopt) + "," + cell_text(c ? c->chance() : std::nullopt) + "\n";
      }
    }
    out += quote(r.label) + ",ALL,Average,,," + cell_text(r.average()) + "," + cell_text(r.chance_average()) + "\n";
  }
  return out;
}

std::string report_json(const std::vector<Report>& reports) {
  auto num = [](const std::optional<Hundredths>& h) { return h ? json(format_hundredths(*h)) : json(nullptr); };
  json out = json::array();
  for (const auto& r : reports) {
    json cells = json::array();
    for (const auto& d : r.datasets) {
      for (QuestionType q : kAllQuestionTypes) {
        const Cell* c = r.cell(d, q);
        if (c == nullptr) continue;
        cells.push_back({{"dataset", d},
                         {"subtask", std::string(to_string(q))},
                         {"correct", c->correct},
                         {"total", c->total},
                         {"accuracy", num(c->accuracy())},
                         {"chance", num(c->chance())}});
      }
    }
    out.push_back({{"label", r.label},
                   {"format_mode", std::string(to_string(r.format_mode))},
                   {"items", r.items},
                   {"parse_failures", r.parse_failures},
                   {"item_errors", r.item_errors},
                   {"cells", cells},
                   {"average", num(r.average())},
                   {"chance_average", num(r.chance_average())}});
  }
  return out.dump(2) + "\n";
}

DeltaTable delta_table(const std::vector<Report>& reports) {
  DeltaTable t;
  t.datasets = all_datasets(reports);
  if (reports.empty()) return t;
  const Report& base = reports.front();
  t.baseline = base.label;
  auto diff = [](const std::optional<Hundredths>& a, const std::optional<Hundredths>& b) -> std::optional<Hundredths> {
    if (!a || !b) return std::nullopt;
    return *a - *b;
  };
  for (std::size_t i = 1; i < reports.size(); ++i) {
    DeltaRow row;
    row.label = reports[i].label;
    for (const auto& d : t.datasets) {
      for (QuestionType q : kAllQuestionTypes) {
        const Cell* a = reports[i].cell(d, q);
        const Cell* b = base.cell(d, q);
        row.cells[{d, q}] = diff(a ? a->accuracy() : std::nullopt, b ? b->accuracy() : std::nullopt);
      }
    }
    row.average = diff(reports[i].average(), base.average());
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string render_delta_markdown(const DeltaTable& table) {
  std::string out = "Change against baseline: " + (table.baseline.empty() ? std::string("-") : table.baseline) + "\n\n";
  out += header_row(table.datasets);
  for (const auto& row : table.rows) {
    out += "| " + row.label + " |";
    for (const auto& d : table.datasets) {
      for (QuestionType q : kAllQuestionTypes) {
        auto it = row.cells.find({d, q});
        out += " " + delta_text(it == row.cells.end() ? std::nullopt : it->second) + " |";
      }
    }
    out += " " + delta_text(row.average) + " |\n";
  }
  return out;
}

std::vector<GridPoint> grid_points(const RunConfig& base) {
  const GridAxes& g = base.grid;
  const auto formats = g.format_modes.empty() ? std::vector<FormatMode>{base.format_mode} : g.format_modes;
  const auto knowledge = g.knowledge_modes.empty() ? std::vector<KnowledgeMode>{base.knowledge_mode} : g.knowledge_modes;
  const auto shots = g.shots.empty() ? std::vector<std::size_t>{base.shots} : g.shots;
  const auto shot_modes = g.shot_modes.empty() ? std::vector<ShotMode>{base.shot_mode} : g.shot_modes;
  std::vector<Ablation> ablations = g.ablations;
  const bool ablation_varies = !ablations.empty() || base.ablation != Ablation::kNone;
  if (ablations.empty()) {
    ablations = base.ablation == Ablation::kNone ? std::vector<Ablation>{Ablation::kNone}
                                                 : std::vector<Ablation>{Ablation::kNone, base.ablation};
  }

  std::vector<GridPoint> out;
  for (FormatMode f : formats) {
    for (KnowledgeMode k : knowledge) {
      for (std::size_t s : shots) {
        for (ShotMode sm : shot_modes) {
          for (Ablation a : ablations) {
            GridPoint p;
            p.config = base;
            p.config.grid = {};
            p.config.format_mode = f;
            p.config.knowledge_mode = k;
            p.config.shots = s;
            p.config.shot_mode = sm;
            p.config.ablation = a;
            std::vector<std::string> parts;
            if (!g.format_modes.empty()) parts.push_back("format_mode=" + std::string(to_string(f)));
            if (!g.knowledge_modes.empty()) parts.push_back("knowledge_mode=" + std::string(to_string(k)));
            if (!g.shots.empty()) parts.push_back("shots=" + std::to_string(s));
            if (!g.shot_modes.empty()) parts.push_back("shot_mode=" + std::string(to_string(sm)));
            if (ablation_varies) parts.push_back("ablation=" + std::string(to_string(a)));
            for (const auto& part : parts) p.label += (p.label.empty() ? "" : " ") + part;
            if (p.label.empty()) p.label = "baseline";
            out.push_back(std::move(p));
          }
        }
      }
    }
  }
  return out;
}

GridResult run_grid(const std::vector<BenchmarkItem>& items, const Pipeline& pipeline, const RunConfig& base) {
  GridResult g;
  g.points = grid_points(base);
  for (const auto& p : g.points) {
    g.runs.push_back(run_eval(items, pipeline, p.config));
    g.reports.push_back(score(g.runs.back(), p.label));
  }
  g.deltas = delta_table(g.reports);
  return g;
}

}  // namespace echo
