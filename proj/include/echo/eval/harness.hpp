#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "echo/config.hpp"
#include "echo/eval/benchmark.hpp"
#include "echo/orchestrator/orchestrator.hpp"

namespace echo {

struct ItemRecord {
  std::string item_id;
  std::string dataset;
  std::string class_name;
  QuestionType subtask = QuestionType::kDiscrimination;
  std::string answer_key;      // the key actually scored against (the true/false key in that mode)
  std::size_t option_count = 0;  // options shown to the model; the random-chance denominator
  Decision decision;
  bool correct = false;        // correct implies parse_status != parse_failure
  ParseStatus parse_status = ParseStatus::kParseFailure;
  std::string note;            // set when the item failed (gateway or component error)
};

struct RunResult {
  std::uint64_t seed = 0;
  FormatMode format_mode = FormatMode::kMultipleChoice;
  std::vector<std::pair<std::string, std::string>> config;  // snapshot of every key
  std::vector<ItemRecord> records;  // benchmark order
  std::size_t skipped_items = 0;    // items the format mode cannot express (true_false on non-Discrimination)

  std::size_t item_errors() const;
};

// One decision as a JSON object (timing included), as printed by the query command.
std::string serialize_decision(const Decision& decision);

// Wall-clock timing is left out so identical runs serialize to identical bytes.
std::string serialize_run_result(const RunResult& result);
RunResult parse_run_result(std::string_view text);  // throws kParseError
void save_run_result(const RunResult& result, const std::string& path);
RunResult load_run_result(const std::string& path);

// Scores one decision against an item under a format mode:
// multiple_choice compares the extracted letter; qa compares the option whose
// text the reply contains (rule 2), so the status is fallback_matched or
// parse_failure; true_false compares against true_false_key.
ItemRecord score_item(const BenchmarkItem& item, const Decision& decision, FormatMode mode);

// Runs every item through run_query on config.parallelism threads. Records
// keep benchmark order whatever the completion order. Only configuration
// errors abort the run; other item failures become parse_failure records with
// a note. In true_false mode only Discrimination items with a recognizable
// no-defect option are run.
RunResult run_eval(const std::vector<BenchmarkItem>& items, const Pipeline& pipeline, const RunConfig& config);

// Optional progress hook: called once per finished item from worker threads.
using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;
RunResult run_eval(const std::vector<BenchmarkItem>& items, const Pipeline& pipeline, const RunConfig& config,
                   const ProgressFn& progress);

}  // namespace echo
