#include "echo/knowledge/knowledge_base.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "json.hpp"

#include "echo/error.hpp"
#include "echo/util/binary_io.hpp"

namespace echo {

namespace {

using nlohmann::json;

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string read_string(const json& object, const char* key, const std::string& where) {
  auto it = object.find(key);
  if (it == object.end()) return {};
  if (!it->is_string()) throw Error(ErrorCode::kParseError, where + ": '" + key + "' must be a string");
  return it->get<std::string>();
}

void reject_unknown_keys(const json& object, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, value] : object.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw Error(ErrorCode::kParseError, where + ": unknown field '" + key + "'");
    }
  }
}

KnowledgeRecord parse_record(const std::string& class_name, const json& value, const std::string& where) {
  if (!value.is_object()) throw Error(ErrorCode::kParseError, where + ": record must be an object");
  reject_unknown_keys(value, {"normal_description", "defect_types", "tolerance_notes"}, where);
  KnowledgeRecord record;
  record.class_name = class_name;
  record.normal_description = read_string(value, "normal_description", where);
  record.tolerance_notes = read_string(value, "tolerance_notes", where);
  if (auto it = value.find("defect_types"); it != value.end()) {
    if (!it->is_array()) throw Error(ErrorCode::kParseError, where + ": 'defect_types' must be an array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& d = (*it)[i];
      const std::string at = where + ".defect_types[" + std::to_string(i) + "]";
      if (!d.is_object()) throw Error(ErrorCode::kParseError, at + ": must be an object");
      reject_unknown_keys(d, {"name", "description", "typical_location", "typical_effect"}, at);
      DefectType defect;
      defect.name = read_string(d, "name", at);
      if (defect.name.empty()) throw Error(ErrorCode::kParseError, at + ": 'name' is required");
      if (!names.insert(defect.name).second) {
        throw Error(ErrorCode::kParseError, at + ": duplicate defect type '" + defect.name + "'");
      }
      defect.description = read_string(d, "description", at);
      defect.typical_location = read_string(d, "typical_location", at);
      defect.typical_effect = read_string(d, "typical_effect", at);
      record.defect_types.push_back(std::move(defect));
    }
  }
  return record;
}

// "broken_large" is mentioned by "broken large", "Broken-Large", ...
std::string loosen(std::string_view text) {
  std::string out = lower(text);
  std::replace_if(out.begin(), out.end(), [](char c) { return c == '_' || c == '-'; }, ' ');
  return out;
}

bool mentions(const std::string& loose_question, const std::string& name) {
  const std::string needle = loosen(name);
  for (std::size_t pos = loose_question.find(needle); pos != std::string::npos;
       pos = loose_question.find(needle, pos + 1)) {
    const bool left = pos == 0 || !std::isalnum(static_cast<unsigned char>(loose_question[pos - 1]));
    const std::size_t end = pos + needle.size();
    const bool right = end == loose_question.size() || !std::isalnum(static_cast<unsigned char>(loose_question[end]));
    if (left && right) return true;
  }
  return false;
}

std::vector<KnowledgeFact> facts_for(const KnowledgeRecord& record, SectionTag tag,
                                     const std::vector<const DefectType*>& focus) {
  std::vector<KnowledgeFact> facts;
  switch (tag) {
    case SectionTag::kNormalAppearance:
      if (!record.normal_description.empty()) facts.push_back({"", record.normal_description});
      break;
    case SectionTag::kTolerance:
      if (!record.tolerance_notes.empty()) facts.push_back({"", record.tolerance_notes});
      break;
    case SectionTag::kDefectTaxonomy:
      for (const DefectType& d : record.defect_types) {
        facts.push_back(d.description.empty() ? KnowledgeFact{"", d.name} : KnowledgeFact{d.name, d.description});
      }
      break;
    case SectionTag::kLocations:
      for (const DefectType* d : focus) {
        if (!d->typical_location.empty()) facts.push_back({d->name, d->typical_location});
      }
      break;
    case SectionTag::kEffects:
      for (const DefectType* d : focus) {
        if (!d->typical_effect.empty()) facts.push_back({d->name, d->typical_effect});
      }
      break;
  }
  return facts;
}

ContextKnowledge extract_sections(const KnowledgeRecord& record, std::string_view question,
                                  const std::vector<SectionTag>& tags, std::size_t budget) {
  const std::string loose = loosen(question);
  std::vector<const DefectType*> focus;
  for (const DefectType& d : record.defect_types) {
    if (mentions(loose, d.name)) focus.push_back(&d);
  }
  if (focus.empty()) {
    for (const DefectType& d : record.defect_types) focus.push_back(&d);
  }

  ContextKnowledge out;
  out.class_name = record.class_name;
  for (SectionTag tag : tags) {
    if (out.has(tag)) continue;
    auto facts = facts_for(record, tag, focus);
    if (!facts.empty()) out.sections.push_back({tag, std::move(facts)});
  }
  apply_budget(out, budget);
  return out;
}

// Longest prefix of text no longer than n bytes that does not split a UTF-8 sequence.
std::string utf8_prefix(const std::string& text, std::size_t n) {
  if (text.size() <= n) return text;
  while (n > 0 && (static_cast<unsigned char>(text[n]) & 0xC0) == 0x80) --n;
  return text.substr(0, n);
}

}  // namespace

KnowledgeBase parse_knowledge(std::string_view text, const std::string& source) {
  if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) return {};

  // The DOM keeps only the last of repeated keys, so duplicates are caught while parsing.
  std::set<std::string> seen;
  std::string duplicate;
  json::parser_callback_t cb = [&](int depth, json::parse_event_t event, json& parsed) {
    if (depth == 1 && event == json::parse_event_t::key && duplicate.empty()) {
      const std::string key = parsed.get<std::string>();
      if (!seen.insert(key).second) duplicate = key;
    }
    return true;
  };
  json doc;
  try {
    doc = json::parse(text.begin(), text.end(), cb);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, source + ": " + e.what());
  }
  if (!duplicate.empty()) throw Error(ErrorCode::kDuplicateClass, source + ": class '" + duplicate + "' appears twice");
  if (!doc.is_object()) throw Error(ErrorCode::kParseError, source + ": top level must be an object keyed by class_name");

  KnowledgeBase base;
  for (const auto& [class_name, value] : doc.items()) {
    if (class_name.empty()) throw Error(ErrorCode::kParseError, source + ": empty class_name key");
    base.emplace(class_name, parse_record(class_name, value, source + ": " + class_name));
  }
  return base;
}

KnowledgeBase load_knowledge(const std::string& path) {
  const auto bytes = util::read_file(path);
  return parse_knowledge(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), path);
}

std::string_view to_string(SectionTag tag) {
  switch (tag) {
    case SectionTag::kNormalAppearance: return "normal_appearance";
    case SectionTag::kDefectTaxonomy: return "defect_taxonomy";
    case SectionTag::kLocations: return "locations";
    case SectionTag::kEffects: return "effects";
    case SectionTag::kTolerance: return "tolerance";
  }
  return "normal_appearance";
}

std::string_view section_title(SectionTag tag) {
  switch (tag) {
    case SectionTag::kNormalAppearance: return "Normal appearance";
    case SectionTag::kDefectTaxonomy: return "Defect types";
    case SectionTag::kLocations: return "Typical locations";
    case SectionTag::kEffects: return "Typical effects";
    case SectionTag::kTolerance: return "Tolerance";
  }
  return "";
}

std::optional<SectionTag> parse_section_tag(std::string_view text) {
  const std::string t = lower(text);
  for (SectionTag tag : kAllSectionTags) {
    if (t == to_string(tag)) return tag;
  }
  return std::nullopt;
}

std::string KnowledgeSection::render() const {
  std::string out = "[";
  out += section_title(tag);
  out += "]";
  for (const KnowledgeFact& f : facts) {
    out += "\n- ";
    if (!f.label.empty()) {
      out += f.label;
      out += ": ";
    }
    out += f.text;
  }
  return out;
}

std::string ContextKnowledge::render() const {
  std::string out;
  for (std::size_t i = 0; i < sections.size(); ++i) {
    if (i > 0) out += '\n';
    out += sections[i].render();
  }
  return out;
}

bool ContextKnowledge::has(SectionTag tag) const {
  return std::any_of(sections.begin(), sections.end(), [tag](const KnowledgeSection& s) { return s.tag == tag; });
}

SectionMapping default_section_mapping() {
  using T = SectionTag;
  return {
      {QuestionType::kDiscrimination, {T::kNormalAppearance, T::kTolerance}},
      {QuestionType::kClassification, {T::kDefectTaxonomy, T::kNormalAppearance}},
      {QuestionType::kLocalization, {T::kLocations}},
      {QuestionType::kDescription, {T::kNormalAppearance, T::kDefectTaxonomy, T::kLocations}},
      {QuestionType::kAnalysis, {T::kEffects, T::kTolerance, T::kDefectTaxonomy}},
  };
}

void apply_budget(ContextKnowledge& knowledge, std::size_t budget) {
  auto& sections = knowledge.sections;
  while (sections.size() > 1 && knowledge.render().size() > budget) sections.pop_back();
  if (sections.empty() || knowledge.render().size() <= budget) return;

  auto& facts = sections.front().facts;
  while (facts.size() > 1 && knowledge.render().size() > budget) facts.pop_back();
  const std::size_t size = knowledge.render().size();
  if (size <= budget) return;
  const std::size_t excess = size - budget;
  KnowledgeFact& last = facts.back();
  if (excess < last.text.size()) {
    last.text = utf8_prefix(last.text, last.text.size() - excess);
    if (!last.text.empty()) return;
  }
  sections.clear();
}

ContextKnowledge extract_context(const KnowledgeRecord& record, std::string_view question, QuestionType qtype,
                                 const ExtractionOptions& options) {
  auto it = options.mapping.find(qtype);
  static const std::vector<SectionTag> kNone;
  return extract_sections(record, question, it == options.mapping.end() ? kNone : it->second, options.budget);
}

ContextKnowledge extract_domain_knowledge(const KnowledgeRecord& record, const ExtractionOptions& options) {
  return extract_sections(record, "", {kAllSectionTags.begin(), kAllSectionTags.end()}, options.budget);
}

ChatRequest extraction_request(const KnowledgeRecord& record, std::string_view question, QuestionType qtype,
                               const ExtractionOptions& options) {
  ChatRequest request;
  request.system_text =
      "You prepare inspection knowledge for a visual anomaly detection assistant. "
      "Keep only the facts that help answer the question and leave everything else out.";

  std::string tags;
  auto it = options.mapping.find(qtype);
  if (it != options.mapping.end()) {
    for (SectionTag tag : it->second) {
      if (!tags.empty()) tags += ", ";
      tags += to_string(tag);
    }
  }

  std::string knowledge = "Object: " + record.class_name + "\n" + extract_domain_knowledge(record, {SIZE_MAX}).render();
  request.user_blocks.push_back("Knowledge:\n" + knowledge);
  request.user_blocks.push_back("Question (" + std::string(to_string(qtype)) + "): " + std::string(question));
  request.user_blocks.push_back(
      "Reply with one or more sections. Start each section with its tag in square brackets on its own line, "
      "chosen from: normal_appearance, defect_taxonomy, locations, effects, tolerance. Put each fact on its own "
      "line starting with \"- \". Prefer these sections: " +
      tags + ". Use at most " + std::to_string(options.budget) + " characters and write nothing else.");
  request.max_tokens = options.max_tokens;
  request.temperature = 0.0;
  return request;
}

std::optional<std::vector<KnowledgeSection>> parse_extraction_reply(std::string_view reply) {
  std::vector<KnowledgeSection> sections;
  std::size_t pos = 0;
  while (pos <= reply.size()) {
    std::size_t end = reply.find('\n', pos);
    if (end == std::string_view::npos) end = reply.size();
    std::string_view line = reply.substr(pos, end - pos);
    pos = end + 1;
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
    if (line.empty()) continue;

    if (line.front() == '[' && line.back() == ']') {
      const auto tag = parse_section_tag(line.substr(1, line.size() - 2));
      if (!tag) return std::nullopt;
      for (const auto& s : sections) {
        if (s.tag == *tag) return std::nullopt;
      }
      sections.push_back({*tag, {}});
      continue;
    }
    if (!line.starts_with("- ") || sections.empty()) return std::nullopt;
    std::string_view fact = line.substr(2);
    if (fact.empty()) return std::nullopt;
    sections.back().facts.push_back({"", std::string(fact)});
  }
  if (sections.empty()) return std::nullopt;
  for (const auto& s : sections) {
    if (s.facts.empty()) return std::nullopt;
  }
  return sections;
}

ContextKnowledge extract_context_via_model(const KnowledgeRecord& record, std::string_view question,
                                           QuestionType qtype, ChatBackend& gateway,
                                           const ExtractionOptions& options) {
  auto fallback = [&](std::string reason) {
    ContextKnowledge out = extract_context(record, question, qtype, options);
    out.used_fallback = true;
    out.fallback_reason = std::move(reason);
    return out;
  };
  if (record.empty()) return extract_context(record, question, qtype, options);

  std::string reply;
  try {
    reply = gateway.chat(extraction_request(record, question, qtype, options));
  } catch (const Error& e) {
    return fallback(e.what());
  }
  auto sections = parse_extraction_reply(reply);
  if (!sections) return fallback("unparsable extraction reply");

  ContextKnowledge out;
  out.class_name = record.class_name;
  out.sections = std::move(*sections);
  apply_budget(out, options.budget);
  if (out.empty()) return fallback("extraction reply does not fit the budget");
  return out;
}

std::string knowledge_to_json(const KnowledgeBase& base) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& [name, record] : base) {
    nlohmann::ordered_json r;
    r["normal_description"] = record.normal_description;
    r["defect_types"] = nlohmann::ordered_json::array();
    for (const DefectType& d : record.defect_types) {
      r["defect_types"].push_back({{"name", d.name},
                                   {"description", d.description},
                                   {"typical_location", d.typical_location},
                                   {"typical_effect", d.typical_effect}});
    }
    r["tolerance_notes"] = record.tolerance_notes;
    doc[name] = std::move(r);
  }
  return doc.dump(2) + "\n";
}

}  // namespace echo
