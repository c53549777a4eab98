#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace echo {

// The five retained inspection subtasks.
enum class QuestionType { kDiscrimination, kClassification, kLocalization, kDescription, kAnalysis };

inline constexpr std::array<QuestionType, 5> kAllQuestionTypes = {
    QuestionType::kDiscrimination, QuestionType::kClassification, QuestionType::kLocalization,
    QuestionType::kDescription, QuestionType::kAnalysis};

// "Discrimination", "Classification", ...
std::string_view to_string(QuestionType type);

// Accepts the short names above and the long benchmark names ("Anomaly Discrimination",
// "Defect Classification", ...), case-insensitively.
std::optional<QuestionType> parse_question_type(std::string_view text);

}  // namespace echo
