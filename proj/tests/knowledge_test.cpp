#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "echo/error.hpp"
#include "echo/knowledge/knowledge_base.hpp"
#include "support/random_data.hpp"

using namespace echo;

namespace {

KnowledgeRecord bottle() {
  KnowledgeRecord r;
  r.class_name = "bottle";
  r.normal_description = "An intact glass rim with a dark interior.";
  r.defect_types = {
      {"scratch", "A thin bright line on the glass.", "Along the outer rim.", "Weakens the glass."},
      {"dent", "A small inward deformation.", "Near the neck.", "Prevents a tight seal."},
      {"crack", "A fracture through the glass wall.", "Anywhere on the rim.", "The bottle may shatter."},
  };
  r.tolerance_notes = "Faint reflections are acceptable.";
  return r;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected echo::Error");
  return ErrorCode::kInvalidArgument;
}

std::vector<SectionTag> tags_of(const ContextKnowledge& k) {
  std::vector<SectionTag> out;
  for (const auto& s : k.sections) out.push_back(s.tag);
  return out;
}

}  // namespace

TEST_CASE("load a one-class knowledge file") {
  const KnowledgeBase base = parse_knowledge(R"({"bottle": {
      "normal_description": "clean",
      "defect_types": [{"name": "scratch", "description": "line"}, {"name": "dent"}],
      "tolerance_notes": "small marks are fine"}})");
  REQUIRE(base.size() == 1);
  const KnowledgeRecord& r = base.at("bottle");
  CHECK(r.class_name == "bottle");
  CHECK(r.defect_types.size() == 2);
  CHECK(r.defect_types[1].name == "dent");
  CHECK(r.defect_types[1].description.empty());
  CHECK(r.tolerance_notes == "small marks are fine");
}

TEST_CASE("knowledge loader rejects malformed input") {
  CHECK(code_of([] { parse_knowledge(R"({"bottle": {}, "cable": {}, "bottle": {}})"); }) == ErrorCode::kDuplicateClass);
  CHECK(parse_knowledge("").empty());
  CHECK(parse_knowledge("  \n\t").empty());
  CHECK(parse_knowledge("{}").empty());
  CHECK(code_of([] { parse_knowledge("[1, 2]"); }) == ErrorCode::kParseError);
  CHECK(code_of([] { parse_knowledge("{\"bottle\": "); }) == ErrorCode::kParseError);
  CHECK(code_of([] { parse_knowledge(R"({"bottle": {"colour": "green"}})"); }) == ErrorCode::kParseError);
  CHECK(code_of([] { parse_knowledge(R"({"bottle": {"normal_description": 3}})"); }) == ErrorCode::kParseError);
  CHECK(code_of([] { parse_knowledge(R"({"bottle": {"defect_types": [{"description": "x"}]}})"); }) ==
        ErrorCode::kParseError);
  CHECK(code_of([] { parse_knowledge(R"({"bottle": {"defect_types": [{"name": "a"}, {"name": "a"}]}})"); }) ==
        ErrorCode::kParseError);
  CHECK(code_of([] { parse_knowledge(R"({"": {}})"); }) == ErrorCode::kParseError);
  // Nested keys may repeat across records without tripping the class check.
  CHECK(parse_knowledge(R"({"a": {"tolerance_notes": "x"}, "b": {"tolerance_notes": "y"}})").size() == 2);
}

TEST_CASE("iteration order is by class name") {
  const KnowledgeBase base = parse_knowledge(R"({"zipper": {}, "bottle": {}, "cable": {}})");
  std::vector<std::string> names;
  for (const auto& [name, record] : base) names.push_back(name);
  CHECK(names == std::vector<std::string>{"bottle", "cable", "zipper"});
}

TEST_CASE("shipped example knowledge file loads and round-trips") {
  const KnowledgeBase base = load_knowledge(ECHO_SOURCE_DIR "/schemas/knowledge.example.json");
  REQUIRE(base.contains("bottle"));
  CHECK(base.at("bottle").defect_types.size() == 2);
  CHECK(parse_knowledge(knowledge_to_json(base)) == base);
}

TEST_CASE("classification lists every defect name") {
  const ContextKnowledge k = extract_context(bottle(), "What is the type of the defect?", QuestionType::kClassification);
  REQUIRE(k.has(SectionTag::kDefectTaxonomy));
  const std::string text = k.render();
  for (const char* name : {"scratch", "dent", "crack"}) CHECK(text.find(name) != std::string::npos);
  CHECK(tags_of(k) == std::vector<SectionTag>{SectionTag::kDefectTaxonomy, SectionTag::kNormalAppearance});
}

TEST_CASE("section selection per question type") {
  const KnowledgeRecord r = bottle();
  using T = SectionTag;
  CHECK(tags_of(extract_context(r, "q", QuestionType::kAnalysis)) ==
        std::vector<T>{T::kEffects, T::kTolerance, T::kDefectTaxonomy});
  CHECK(tags_of(extract_context(r, "q", QuestionType::kDiscrimination)) ==
        std::vector<T>{T::kNormalAppearance, T::kTolerance});
  CHECK(tags_of(extract_context(r, "q", QuestionType::kLocalization)) == std::vector<T>{T::kLocations});
  CHECK(tags_of(extract_context(r, "q", QuestionType::kDescription)) ==
        std::vector<T>{T::kNormalAppearance, T::kDefectTaxonomy, T::kLocations});
  CHECK(extract_domain_knowledge(r).sections.size() == 5);
}

TEST_CASE("empty record yields no sections") {
  KnowledgeRecord empty;
  empty.class_name = "bottle";
  for (QuestionType q : kAllQuestionTypes) CHECK(extract_context(empty, "What?", q).empty());
  CHECK(extract_domain_knowledge(empty).empty());
}

TEST_CASE("named defects narrow locations and effects") {
  const ContextKnowledge k =
      extract_context(bottle(), "What is the effect of the DENT on this bottle?", QuestionType::kAnalysis);
  REQUIRE(k.has(SectionTag::kEffects));
  CHECK(k.sections[0].facts == std::vector<KnowledgeFact>{{"dent", "Prevents a tight seal."}});
  // The taxonomy stays complete so the model can still tell the types apart.
  CHECK(k.sections[2].facts.size() == 3);
  // "dented" is not a mention of "dent".
  const ContextKnowledge all = extract_context(bottle(), "Is it dented?", QuestionType::kAnalysis);
  CHECK(all.sections[0].facts.size() == 3);
}

TEST_CASE("sections render as titled fact lists") {
  const ContextKnowledge k = extract_context(bottle(), "q", QuestionType::kDiscrimination);
  CHECK(k.render() ==
        "[Normal appearance]\n- An intact glass rim with a dark interior.\n[Tolerance]\n- Faint reflections are "
        "acceptable.");
}

TEST_CASE("budget drops the lowest-priority section first") {
  const KnowledgeRecord r = bottle();
  const ContextKnowledge full = extract_context(r, "q", QuestionType::kAnalysis);
  ExtractionOptions options;
  options.budget = full.render().size() - 1;
  const ContextKnowledge trimmed = extract_context(r, "q", QuestionType::kAnalysis, options);
  CHECK(tags_of(trimmed) == std::vector<SectionTag>{SectionTag::kEffects, SectionTag::kTolerance});
  CHECK(trimmed.render().size() <= options.budget);

  options.budget = 40;
  const ContextKnowledge tiny = extract_context(r, "q", QuestionType::kAnalysis, options);
  CHECK(tiny.render().size() <= 40);
  REQUIRE(tiny.sections.size() == 1);
  CHECK(tiny.sections[0].facts.size() == 1);

  options.budget = 5;
  CHECK(extract_context(r, "q", QuestionType::kAnalysis, options).empty());
}

TEST_CASE("section mapping is configurable") {
  ExtractionOptions options;
  options.mapping[QuestionType::kAnalysis] = {SectionTag::kLocations};
  CHECK(tags_of(extract_context(bottle(), "q", QuestionType::kAnalysis, options)) ==
        std::vector<SectionTag>{SectionTag::kLocations});
}

TEST_CASE("rule-based extraction properties on random records") {
  testing::Rng rng(7);
  const std::vector<std::string> words = {"glass", "rim", "dark", "scratch", "dent", "seal", "ü", "bright", "thin",
                                          "neck", "crack", "mark"};
  auto sentence = [&](std::size_t max_words) {
    std::string s;
    const std::size_t n = rng.below(max_words + 1);
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + words[rng.below(words.size())];
    return s;
  };
  const auto mapping = default_section_mapping();

  for (int trial = 0; trial < 500; ++trial) {
    KnowledgeRecord r;
    r.class_name = "c" + std::to_string(trial);
    r.normal_description = sentence(30);
    r.tolerance_notes = sentence(20);
    const std::size_t defects = rng.below(6);
    for (std::size_t d = 0; d < defects; ++d) {
      r.defect_types.push_back({"type" + std::to_string(d) + "_" + words[rng.below(words.size())], sentence(15),
                                sentence(10), sentence(10)});
    }
    const QuestionType q = kAllQuestionTypes[rng.below(5)];
    const std::string question = "What about " + sentence(6) + (defects ? " " + r.defect_types[0].name : "") + "?";
    ExtractionOptions options;
    options.budget = rng.below(3) == 0 ? 1200 : rng.below(400);

    const ContextKnowledge k = extract_context(r, question, q, options);
    CAPTURE(trial);
    CHECK(k.render().size() <= options.budget);
    const auto& allowed = mapping.at(q);
    for (const auto& s : k.sections) {
      CHECK(std::find(allowed.begin(), allowed.end(), s.tag) != allowed.end());
      CHECK(!s.facts.empty());
      for (const auto& f : s.facts) {
        bool verbatim = f.text == r.normal_description.substr(0, f.text.size()) ||
                        f.text == r.tolerance_notes.substr(0, f.text.size());
        for (const auto& d : r.defect_types) {
          for (const std::string* field : {&d.name, &d.description, &d.typical_location, &d.typical_effect}) {
            verbatim = verbatim || (!f.text.empty() && field->find(f.text) == 0);
          }
        }
        CHECK(verbatim);
        if (!f.label.empty()) {
          CHECK(std::any_of(r.defect_types.begin(), r.defect_types.end(),
                            [&](const DefectType& d) { return d.name == f.label; }));
        }
      }
    }
    const ContextKnowledge again = extract_context(r, question, q, options);
    CHECK(again.render() == k.render());
  }
}

TEST_CASE("model-assisted extraction uses well-formed replies") {
  MockChatBackend mock(MockScript::parse(R"({"default_reply":
      "[defect_taxonomy]\n- scratch: a thin bright line\n- crack: a fracture\n\n[tolerance]\n- reflections are fine\n"})"));
  const ContextKnowledge k =
      extract_context_via_model(bottle(), "What is the type of the defect?", QuestionType::kClassification, mock);
  CHECK_FALSE(k.used_fallback);
  REQUIRE(k.sections.size() == 2);
  CHECK(k.sections[0].tag == SectionTag::kDefectTaxonomy);
  CHECK(k.sections[0].facts[1].text == "crack: a fracture");
  CHECK(k.sections[1].tag == SectionTag::kTolerance);
}

TEST_CASE("model-assisted extraction falls back on garbage and gateway errors") {
  const ContextKnowledge rule = extract_context(bottle(), "What is the type of the defect?", QuestionType::kClassification);
  for (const char* script : {R"({"default_reply": "Sure! Here is what I found about bottles."})",
                             R"({"default_reply": "[colour]\n- green"})",
                             R"({"default_reply": "[tolerance]\n"})",
                             R"({"default_reply": ""})",
                             R"({"rules": [{"contains": "", "error": "timeout"}]})",
                             R"({"rules": [{"contains": "", "error": "unavailable"}]})"}) {
    CAPTURE(script);
    MockChatBackend mock(MockScript::parse(script));
    const ContextKnowledge k =
        extract_context_via_model(bottle(), "What is the type of the defect?", QuestionType::kClassification, mock);
    CHECK(k.used_fallback);
    CHECK_FALSE(k.fallback_reason.empty());
    CHECK(k.render() == rule.render());
  }
}

TEST_CASE("extraction request carries the record and question") {
  const ChatRequest req = extraction_request(bottle(), "Where is the crack?", QuestionType::kLocalization);
  const std::string text = req.serialize();
  CHECK(text.find("Object: bottle") != std::string::npos);
  CHECK(text.find("Where is the crack?") != std::string::npos);
  CHECK(text.find("Prefer these sections: locations.") != std::string::npos);
  CHECK(req.temperature == 0.0);
}

TEST_CASE("extraction reply parser") {
  CHECK(parse_extraction_reply("[locations]\n- rim").has_value());
  CHECK(parse_extraction_reply("  [Locations]  \r\n  - rim  \r\n").has_value());
  CHECK_FALSE(parse_extraction_reply("- rim").has_value());
  CHECK_FALSE(parse_extraction_reply("[locations]\n- rim\n[locations]\n- neck").has_value());
  CHECK_FALSE(parse_extraction_reply("[locations]\nrim").has_value());
  CHECK_FALSE(parse_extraction_reply("[locations]\n- ").has_value());
}
