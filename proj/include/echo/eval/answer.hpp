#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "echo/orchestrator/types.hpp"

namespace echo {

enum class ParseStatus { kOk, kFallbackMatched, kParseFailure };

std::string_view to_string(ParseStatus s);  // ok | fallback_matched | parse_failure
ParseStatus parse_parse_status(std::string_view text);

struct ChoiceResult {
  std::optional<std::string> letter;
  ParseStatus status = ParseStatus::kParseFailure;
};

// Rule 1: the first standalone option letter ("B", "B.", "(B)", "B)", "**B**").
// Rule 2: otherwise, the single option whose full text appears in the reply
//         (case-insensitive, on word boundaries).
// Otherwise parse_failure.
ChoiceResult extract_choice(std::string_view reply, const std::vector<AnswerOption>& options);

// Rule 2 alone, used to score free-text answers.
ChoiceResult match_option_text(std::string_view reply, const std::vector<AnswerOption>& options);

}  // namespace echo
