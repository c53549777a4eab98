#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "echo/gateway/chat.hpp"
#include "echo/question_type.hpp"

namespace echo {

struct DefectType {
  std::string name;
  std::string description;
  std::string typical_location;
  std::string typical_effect;

  friend bool operator==(const DefectType&, const DefectType&) = default;
};

struct KnowledgeRecord {
  std::string class_name;
  std::string normal_description;
  std::vector<DefectType> defect_types;
  std::string tolerance_notes;

  bool empty() const { return normal_description.empty() && defect_types.empty() && tolerance_notes.empty(); }
  friend bool operator==(const KnowledgeRecord&, const KnowledgeRecord&) = default;
};

// Ordered by class_name.
using KnowledgeBase = std::map<std::string, KnowledgeRecord>;

// Validates against schemas/knowledge.schema.json. Throws kParseError or
// kDuplicateClass. Empty or whitespace-only input is an empty base.
KnowledgeBase parse_knowledge(std::string_view text, const std::string& source = "<knowledge>");
KnowledgeBase load_knowledge(const std::string& path);

enum class SectionTag { kNormalAppearance, kDefectTaxonomy, kLocations, kEffects, kTolerance };

inline constexpr std::array<SectionTag, 5> kAllSectionTags = {
    SectionTag::kNormalAppearance, SectionTag::kDefectTaxonomy, SectionTag::kLocations, SectionTag::kEffects,
    SectionTag::kTolerance};

std::string_view to_string(SectionTag tag);       // "normal_appearance", ...
std::string_view section_title(SectionTag tag);   // "Normal appearance", ...
std::optional<SectionTag> parse_section_tag(std::string_view text);

// One extracted statement. In rule-based mode text is a verbatim record field
// (or a prefix of one when the budget cuts it) and label, when set, is a defect name.
struct KnowledgeFact {
  std::string label;
  std::string text;

  friend bool operator==(const KnowledgeFact&, const KnowledgeFact&) = default;
};

struct KnowledgeSection {
  SectionTag tag;
  std::vector<KnowledgeFact> facts;

  std::string render() const;  // "[Title]\n- label: text\n..." without a trailing newline
  friend bool operator==(const KnowledgeSection&, const KnowledgeSection&) = default;
};

// T_k: the knowledge text handed to the prompt.
struct ContextKnowledge {
  std::string class_name;
  std::vector<KnowledgeSection> sections;
  bool used_fallback = false;   // model path failed and the rule-based path answered
  std::string fallback_reason;

  bool empty() const { return sections.empty(); }
  std::string render() const;  // sections joined by '\n'
  bool has(SectionTag tag) const;
};

// Sections emitted per question type, highest priority first.
using SectionMapping = std::map<QuestionType, std::vector<SectionTag>>;
SectionMapping default_section_mapping();

struct ExtractionOptions {
  std::size_t budget = 1200;  // max characters of ContextKnowledge::render()
  SectionMapping mapping = default_section_mapping();
  std::size_t max_tokens = 512;
};

// Context-specific relevance extraction. Pure function of its inputs.
// When the question names defect types of the record, the locations and
// effects sections keep only those defects.
ContextKnowledge extract_context(const KnowledgeRecord& record, std::string_view question, QuestionType qtype,
                                 const ExtractionOptions& options = {});

// Unfiltered domain knowledge: every section, same budget rule.
ContextKnowledge extract_domain_knowledge(const KnowledgeRecord& record, const ExtractionOptions& options = {});

// Asks the chat backend to pick and condense the relevant facts. Any gateway
// error or unparsable reply falls back to extract_context with used_fallback set.
ContextKnowledge extract_context_via_model(const KnowledgeRecord& record, std::string_view question,
                                           QuestionType qtype, ChatBackend& gateway,
                                           const ExtractionOptions& options = {});

ChatRequest extraction_request(const KnowledgeRecord& record, std::string_view question, QuestionType qtype,
                               const ExtractionOptions& options = {});

// Parses the "[tag]\n- fact" reply format; nullopt when the reply does not conform.
std::optional<std::vector<KnowledgeSection>> parse_extraction_reply(std::string_view reply);

// Drops whole sections from the back until the rendering fits; the last section
// left then loses trailing facts, and a lone fact is cut to a prefix.
void apply_budget(ContextKnowledge& knowledge, std::size_t budget);

std::string knowledge_to_json(const KnowledgeBase& base);

}  // namespace echo
