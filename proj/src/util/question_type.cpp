#include "echo/question_type.hpp"

#include <algorithm>
#include <cctype>

namespace echo {

std::string_view to_string(QuestionType type) {
  switch (type) {
    case QuestionType::kDiscrimination: return "Discrimination";
    case QuestionType::kClassification: return "Classification";
    case QuestionType::kLocalization: return "Localization";
    case QuestionType::kDescription: return "Description";
    case QuestionType::kAnalysis: return "Analysis";
  }
  return "Discrimination";
}

std::optional<QuestionType> parse_question_type(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  for (QuestionType type : kAllQuestionTypes) {
    std::string shortname(to_string(type));
    std::transform(shortname.begin(), shortname.end(), shortname.begin(), [](unsigned char c) { return std::tolower(c); });
    const std::string prefix = type == QuestionType::kDiscrimination ? "anomaly " : "defect ";
    if (t == shortname || t == prefix + shortname) return type;
  }
  if (t == "anomaly detection") return QuestionType::kDiscrimination;
  return std::nullopt;
}

}  // namespace echo
