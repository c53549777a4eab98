#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "echo/question_type.hpp"

namespace echo {

enum class FormatMode { kMultipleChoice, kQa, kTrueFalse };
enum class KnowledgeMode { kNone, kDomain, kContext };
enum class KnowledgeExtractor { kRule, kModel };
enum class ShotMode { kRetrieved, kRandom };
enum class Ablation { kNone, kNoReferenceExtractor, kNoKnowledgeGuide, kNoReasoningExpert, kNoAll };

std::string_view to_string(FormatMode m);          // multiple_choice | qa | true_false
std::string_view to_string(KnowledgeMode m);       // none | domain | context
std::string_view to_string(KnowledgeExtractor m);  // rule | model
std::string_view to_string(ShotMode m);            // retrieved | random
std::string_view to_string(Ablation a);            // none | w/o_REr | w/o_KG | w/o_REx | w/o_all

// All parsers throw kConfigError on unknown names.
FormatMode parse_format_mode(std::string_view text);
KnowledgeMode parse_knowledge_mode(std::string_view text);
KnowledgeExtractor parse_knowledge_extractor(std::string_view text);
ShotMode parse_shot_mode(std::string_view text);
Ablation parse_ablation(std::string_view text);  // also accepts "w/o REr", "wo_REr", case-insensitive

// Decision Maker is part of every set and has no flag.
struct ExpertSet {
  bool reference_extractor = false;
  bool knowledge_guide = false;
  bool reasoning_expert = false;
  static constexpr bool decision_maker = true;

  friend bool operator==(const ExpertSet&, const ExpertSet&) = default;
};

std::string to_string(const ExpertSet& experts);  // "REr,KG,REx,DM" subset in that order
ExpertSet parse_expert_set(std::string_view text);  // comma list; must name DM (kConfigError)

using ExpertMapping = std::map<QuestionType, ExpertSet>;
ExpertMapping default_expert_mapping();

struct AnswerOption {
  std::string letter;
  std::string text;

  friend bool operator==(const AnswerOption&, const AnswerOption&) = default;
};

}  // namespace echo
