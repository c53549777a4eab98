#pragma once

// Benchmark files are JSON Lines: one item object per non-blank line. The
// schema is documented in schemas/benchmark.md.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "echo/config.hpp"
#include "echo/orchestrator/orchestrator.hpp"
#include "echo/orchestrator/types.hpp"
#include "echo/question_type.hpp"

namespace echo {

struct BenchmarkItem {
  std::string id;
  std::string dataset;     // e.g. "MVTec-AD", "VisA"
  std::string image_path;  // as written; relative paths resolve against image_root
  std::string class_name;
  QuestionType subtask = QuestionType::kDiscrimination;
  std::string question;
  std::vector<AnswerOption> options;  // letters consecutive from "A"
  std::string answer_key;             // one of the option letters
  std::map<std::string, std::string> meta;
};

struct Benchmark {
  std::vector<BenchmarkItem> items;
  std::size_t skipped_out_of_scope = 0;  // Object Classification / Object Analysis records
  std::size_t missing_images = 0;        // counted under the warn policy
  std::vector<std::string> warnings;
};

// Validates every record: unique non-empty id, 2 options for Discrimination
// and 2 to 4 otherwise, answer key among the letters. Errors name the line.
// Throws kParseError, or kMissingImage under the fail policy.
Benchmark parse_benchmark(std::string_view text, const std::string& source = "benchmark",
                          MissingImagePolicy policy = MissingImagePolicy::kIgnore, const std::string& image_root = {});
Benchmark load_benchmark(const std::string& path, MissingImagePolicy policy = MissingImagePolicy::kWarn,
                         const std::string& image_root = {});

void save_benchmark(const std::vector<BenchmarkItem>& items, const std::string& path);
std::string benchmark_line(const BenchmarkItem& item);

// True when the option reads as the "nothing wrong" outcome ("No", "No defect",
// "Normal", "Defect-free", "None", "Good").
bool is_no_defect_option(std::string_view text);

// Key of the true/false form of a Discrimination item: "A" (True) when the
// answer key is the no-defect option, else "B". Nullopt for other subtasks or
// when no option reads as no-defect.
std::optional<std::string> true_false_key(const BenchmarkItem& item);

}  // namespace echo
