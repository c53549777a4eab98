#include "echo/orchestrator/types.hpp"

#include <algorithm>
#include <cctype>

#include "echo/error.hpp"

namespace echo {

namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

[[noreturn]] void unknown(std::string_view what, std::string_view text) {
  throw Error(ErrorCode::kConfigError, "unknown " + std::string(what) + " '" + std::string(text) + "'");
}

}  // namespace

std::string_view to_string(FormatMode m) {
  switch (m) {
    case FormatMode::kMultipleChoice: return "multiple_choice";
    case FormatMode::kQa: return "qa";
    case FormatMode::kTrueFalse: return "true_false";
  }
  return "multiple_choice";
}

std::string_view to_string(KnowledgeMode m) {
  switch (m) {
    case KnowledgeMode::kNone: return "none";
    case KnowledgeMode::kDomain: return "domain";
    case KnowledgeMode::kContext: return "context";
  }
  return "none";
}

std::string_view to_string(KnowledgeExtractor m) { return m == KnowledgeExtractor::kRule ? "rule" : "model"; }

std::string_view to_string(ShotMode m) { return m == ShotMode::kRetrieved ? "retrieved" : "random"; }

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kNoReferenceExtractor: return "w/o_REr";
    case Ablation::kNoKnowledgeGuide: return "w/o_KG";
    case Ablation::kNoReasoningExpert: return "w/o_REx";
    case Ablation::kNoAll: return "w/o_all";
  }
  return "none";
}

FormatMode parse_format_mode(std::string_view text) {
  const std::string t = lower(text);
  if (t == "multiple_choice" || t == "mc") return FormatMode::kMultipleChoice;
  if (t == "qa") return FormatMode::kQa;
  if (t == "true_false" || t == "tf") return FormatMode::kTrueFalse;
  unknown("format mode", text);
}

KnowledgeMode parse_knowledge_mode(std::string_view text) {
  const std::string t = lower(text);
  if (t == "none") return KnowledgeMode::kNone;
  if (t == "domain") return KnowledgeMode::kDomain;
  if (t == "context") return KnowledgeMode::kContext;
  unknown("knowledge mode", text);
}

KnowledgeExtractor parse_knowledge_extractor(std::string_view text) {
  const std::string t = lower(text);
  if (t == "rule") return KnowledgeExtractor::kRule;
  if (t == "model") return KnowledgeExtractor::kModel;
  unknown("knowledge extractor", text);
}

ShotMode parse_shot_mode(std::string_view text) {
  const std::string t = lower(text);
  if (t == "retrieved") return ShotMode::kRetrieved;
  if (t == "random") return ShotMode::kRandom;
  unknown("shot mode", text);
}

Ablation parse_ablation(std::string_view text) {
  std::string t = lower(text);
  std::replace(t.begin(), t.end(), ' ', '_');
  if (t.starts_with("wo_")) t = "w/o_" + t.substr(3);
  if (t == "none" || t == "baseline") return Ablation::kNone;
  if (t == "w/o_rer") return Ablation::kNoReferenceExtractor;
  if (t == "w/o_kg") return Ablation::kNoKnowledgeGuide;
  if (t == "w/o_rex") return Ablation::kNoReasoningExpert;
  if (t == "w/o_all") return Ablation::kNoAll;
  unknown("ablation", text);
}

std::string to_string(const ExpertSet& experts) {
  std::string out;
  if (experts.reference_extractor) out += "REr,";
  if (experts.knowledge_guide) out += "KG,";
  if (experts.reasoning_expert) out += "REx,";
  out += "DM";
  return out;
}

ExpertSet parse_expert_set(std::string_view text) {
  ExpertSet out;
  bool dm = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string name = lower(text.substr(pos, end - pos));
    name.erase(std::remove_if(name.begin(), name.end(), [](unsigned char c) { return std::isspace(c); }), name.end());
    pos = end + 1;
    if (name == "rer") {
      out.reference_extractor = true;
    } else if (name == "kg") {
      out.knowledge_guide = true;
    } else if (name == "rex") {
      out.reasoning_expert = true;
    } else if (name == "dm") {
      dm = true;
    } else {
      unknown("expert", name);
    }
  }
  if (!dm) throw Error(ErrorCode::kConfigError, "expert set '" + std::string(text) + "' must include DM");
  return out;
}

ExpertMapping default_expert_mapping() {
  return {
      {QuestionType::kDiscrimination, {true, false, false}},
      {QuestionType::kClassification, {true, true, false}},
      {QuestionType::kLocalization, {false, false, false}},
      {QuestionType::kDescription, {true, true, true}},
      {QuestionType::kAnalysis, {true, false, true}},
  };
}

}  // namespace echo
