#include <set>

#include "doctest.h"

#include "echo/error.hpp"
#include "echo/orchestrator/orchestrator.hpp"
#include "support/golden.hpp"
#include "support/random_data.hpp"

using namespace echo;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected echo::Error");
  return ErrorCode::kInvalidArgument;
}

KnowledgeRecord bottle_record() {
  KnowledgeRecord r;
  r.class_name = "bottle";
  r.normal_description = "An intact glass rim with a dark interior.";
  r.defect_types = {{"broken_large", "A large piece is missing from the rim.", "Outer rim.", "Cannot be sealed."},
                    {"contamination", "Foreign material inside.", "Bottom of the bottle.", "Not hygienic."}};
  r.tolerance_notes = "Faint reflections are acceptable.";
  return r;
}

QueryBundle discrimination_query() {
  QueryBundle q;
  q.id = "bottle-042";
  q.query_image = "images/bottle/test/broken_large/042.png";
  q.question = "Is there any defect in the object?";
  q.options = {{"A", "Yes"}, {"B", "No"}};
  q.class_name = "bottle";
  return q;
}

ReferenceResult one_reference() {
  ReferenceResult refs;
  MemoryEntry e = testing::make_entry(7, {1.0f, 0.0f});
  e.source_uri = "images/bottle/train/good/007.png";
  refs.entries.push_back(e);
  refs.scores.push_back(0.97);
  refs.shots_requested = refs.shots_returned = 1;
  return refs;
}

constexpr ExpertSet kAll{true, true, true};

std::vector<BlockTag> tags_of(const PromptBundle& p) {
  std::vector<BlockTag> out;
  for (const auto& b : p.blocks) out.push_back(b.tag);
  return out;
}

}  // namespace

TEST_CASE("question classification follows the keyword rules") {
  CHECK(classify_question("Is there any defect in the object?") == QuestionType::kDiscrimination);
  CHECK(classify_question("What is the type of the defect?") == QuestionType::kClassification);
  CHECK(classify_question("What is the appearance of the defect?") == QuestionType::kDescription);
  CHECK(classify_question("Where is the defect?") == QuestionType::kLocalization);
  CHECK(classify_question("In which region is the flaw located? Which region?") == QuestionType::kLocalization);
  CHECK(classify_question("What does the defect look like?") == QuestionType::kDescription);
  CHECK(classify_question("What is the effect of the defect?") == QuestionType::kAnalysis);
  CHECK(classify_question("Is this sample anomalous?") == QuestionType::kDiscrimination);
  CHECK(classify_question("Hello there") == QuestionType::kDiscrimination);
  // First hit wins: "any defect" outranks "where".
  CHECK(classify_question("Where, if anywhere, is there any defect?") == QuestionType::kDiscrimination);
  CHECK(classify_question("What is the type of the defect?", {}, QuestionType::kAnalysis) == QuestionType::kAnalysis);
}

TEST_CASE("expert routing table") {
  const ExpertSet d = select_experts(QuestionType::kDiscrimination);
  CHECK(d == ExpertSet{true, false, false});
  CHECK(select_experts(QuestionType::kClassification) == ExpertSet{true, true, false});
  CHECK(select_experts(QuestionType::kLocalization) == ExpertSet{false, false, false});
  CHECK(select_experts(QuestionType::kDescription) == ExpertSet{true, true, true});
  CHECK(select_experts(QuestionType::kAnalysis) == ExpertSet{true, false, true});
  for (QuestionType q : kAllQuestionTypes) CHECK(to_string(select_experts(q)).ends_with("DM"));
  CHECK(to_string(select_experts(QuestionType::kDescription)) == "REr,KG,REx,DM");
}

TEST_CASE("ablations clear exactly their expert") {
  CHECK(apply_ablation(kAll, Ablation::kNoReferenceExtractor) == ExpertSet{false, true, true});
  CHECK(apply_ablation(kAll, Ablation::kNoKnowledgeGuide) == ExpertSet{true, false, true});
  CHECK(apply_ablation(kAll, Ablation::kNoReasoningExpert) == ExpertSet{true, true, false});
  CHECK(apply_ablation(kAll, Ablation::kNoAll) == ExpertSet{});
  CHECK(apply_ablation(kAll, Ablation::kNone) == kAll);
  CHECK(parse_ablation("w/o REr") == Ablation::kNoReferenceExtractor);
  CHECK(parse_ablation("W/O_kg") == Ablation::kNoKnowledgeGuide);
  CHECK(parse_ablation("wo_all") == Ablation::kNoAll);
  CHECK(code_of([] { parse_ablation("w/o_DM"); }) == ErrorCode::kConfigError);
  CHECK(parse_expert_set("REr, KG, DM") == ExpertSet{true, true, false});
  CHECK(code_of([] { parse_expert_set("REr,KG"); }) == ErrorCode::kConfigError);
}

TEST_CASE("retrieval excludes anomalous entries") {
  VectorMemory m(2);
  // n1: cos 0.99, n2: cos 0.80, a1: cos 0.999 to the query [1, 0].
  auto at = [](double cos) { return std::vector<float>{float(cos), float(std::sqrt(1 - cos * cos))}; };
  m.insert(testing::make_entry(0, at(0.99)));
  m.insert(testing::make_entry(1, at(0.80)));
  m.insert(testing::make_entry(2, at(0.999), "bottle", Label::kAnomalous));
  const Embedding q({1.0f, 0.0f});

  const ReferenceResult r = retrieve_reference(m, nullptr, q, "bottle", 1);
  REQUIRE(r.entries.size() == 1);
  CHECK(r.entries[0].id == 0);
  CHECK(r.scores[0] == doctest::Approx(0.99).epsilon(1e-6));

  const ReferenceResult none = retrieve_reference(m, nullptr, q, "bottle", 0);
  CHECK(none.entries.empty());
  CHECK(none.shots_returned == 0);

  const ReferenceResult three = retrieve_reference(m, nullptr, q, "bottle", 3);
  CHECK(three.shots_returned == 2);
  CHECK(three.shots_requested == 3);
  CHECK(three.entries[1].id == 1);

  CHECK(code_of([&] { retrieve_reference(m, nullptr, q, "cable", 1); }) == ErrorCode::kNoNormalSamples);
  CHECK(retrieve_reference(m, nullptr, q, "cable", 0).entries.empty());
}

TEST_CASE("retrieval without a class searches every normal image") {
  VectorMemory m(2);
  m.insert(testing::make_entry(0, {0.0f, 1.0f}, "bottle"));
  m.insert(testing::make_entry(1, {1.0f, 0.1f}, "cable"));
  m.insert(testing::make_entry(2, {1.0f, 0.0f}, "cable", Label::kNormal, Modality::kText));
  const ReferenceResult r = retrieve_reference(m, nullptr, Embedding({1.0f, 0.0f}), std::nullopt, 3);
  REQUIRE(r.entries.size() == 2);
  CHECK(r.entries[0].id == 1);
  CHECK(r.entries[1].id == 0);
}

TEST_CASE("retrieval properties on random labeled memories") {
  testing::Rng rng(2024);
  const std::vector<std::string> classes = {"bottle", "cable", "screw"};
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 20 + rng.below(200);
    const std::size_t dim = 4 + rng.below(40);
    VectorMemory m(dim);
    for (std::size_t i = 0; i < n; ++i) {
      const Label label = rng.below(3) == 0 ? Label::kAnomalous : (rng.below(10) == 0 ? Label::kUnknown : Label::kNormal);
      m.insert(testing::make_entry(i, rng.gaussian_vector(dim), classes[rng.below(3)], label));
    }
    const HnswIndex index = HnswIndex::build(m, HnswParams::for_m(4 + rng.below(8)));
    const Embedding q(rng.gaussian_vector(dim));
    const std::string cls = classes[rng.below(3)];
    const std::size_t shots = 1 + rng.below(3);
    auto filter = [&](const EntryInfo& e) { return e.label == Label::kNormal && e.class_name == cls; };
    const auto oracle = m.brute_force_top_k(q, shots, filter);
    if (oracle.empty()) continue;
    CAPTURE(trial);

    for (const HnswIndex* ix : {static_cast<const HnswIndex*>(nullptr), &index}) {
      const ReferenceResult r = retrieve_reference(m, ix, q, cls, shots);
      REQUIRE(r.entries.size() == oracle.size());
      if (ix == nullptr) {
        for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(r.entries[i].id == oracle[i].id);
      }
      for (std::size_t i = 0; i < r.entries.size(); ++i) {
        CHECK(r.entries[i].label == Label::kNormal);
        CHECK(r.entries[i].class_name == cls);
        if (i > 0) CHECK(r.scores[i] <= r.scores[i - 1]);
      }
    }

    const ReferenceResult random = retrieve_reference(m, nullptr, q, cls, shots, ShotMode::kRandom, trial);
    CHECK(random.entries.size() == oracle.size());
    std::set<EntryId> ids;
    for (std::size_t i = 0; i < random.entries.size(); ++i) {
      CHECK(filter(random.entries[i]));
      ids.insert(random.entries[i].id);
      if (i > 0) CHECK(random.scores[i] <= random.scores[i - 1]);
    }
    CHECK(ids.size() == random.entries.size());
    const ReferenceResult again = retrieve_reference(m, nullptr, q, cls, shots, ShotMode::kRandom, trial);
    for (std::size_t i = 0; i < again.entries.size(); ++i) CHECK(again.entries[i].id == random.entries[i].id);
  }
}

TEST_CASE("random shots sample the pool uniformly") {
  VectorMemory m(2);
  for (EntryId i = 0; i < 4; ++i) m.insert(testing::make_entry(i, {1.0f, float(i)}));
  std::array<int, 4> hits{};
  for (std::uint64_t seed = 0; seed < 4000; ++seed) {
    ++hits[retrieve_reference(m, nullptr, Embedding({1.0f, 0.0f}), "bottle", 1, ShotMode::kRandom, seed).entries[0].id];
  }
  // 1000 expected per id; 5 sigma is about 137.
  for (int h : hits) CHECK(std::abs(h - 1000) < 140);
}

TEST_CASE("prompt with only the decision maker") {
  QueryBundle q = discrimination_query();
  const PromptBundle p = assemble_prompt(q, {}, nullptr, ExpertSet{}, FormatMode::kQa);
  CHECK(tags_of(p) == std::vector<BlockTag>{BlockTag::kQuestion, BlockTag::kAnswerFormat});
  REQUIRE(p.attachments.size() == 1);
  CHECK(p.attachments[0].uri == q.query_image);
}

TEST_CASE("block presence follows experts and inputs") {
  const QueryBundle q = discrimination_query();
  const ContextKnowledge k = extract_domain_knowledge(bottle_record());
  const PromptBundle full = assemble_prompt(q, one_reference(), &k, kAll, FormatMode::kMultipleChoice);
  CHECK(tags_of(full) == std::vector<BlockTag>{BlockTag::kReferenceImages, BlockTag::kKnowledge,
                                               BlockTag::kReasoningDirective, BlockTag::kQuestion, BlockTag::kOptions,
                                               BlockTag::kAnswerFormat});
  REQUIRE(full.attachments.size() == 2);
  CHECK(full.attachments[0].uri == "images/bottle/train/good/007.png");
  CHECK(full.attachments[1].uri == q.query_image);

  // Expert on but nothing to show: no block.
  const ContextKnowledge empty;
  CHECK_FALSE(assemble_prompt(q, {}, &empty, kAll, FormatMode::kMultipleChoice).has(BlockTag::kReferenceImages));
  CHECK_FALSE(assemble_prompt(q, {}, &empty, kAll, FormatMode::kMultipleChoice).has(BlockTag::kKnowledge));
  CHECK(assemble_prompt(q, {}, &empty, kAll, FormatMode::kMultipleChoice).has(BlockTag::kReasoningDirective));

  CHECK(code_of([&] {
          QueryBundle bare = q;
          bare.options.clear();
          assemble_prompt(bare, {}, nullptr, kAll, FormatMode::kMultipleChoice);
        }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([&] {
          QueryBundle bad = q;
          bad.options[1].letter = "C";
          assemble_prompt(bad, {}, nullptr, kAll, FormatMode::kQa);
        }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("ablating an expert removes only its block") {
  const QueryBundle q = discrimination_query();
  const ContextKnowledge k = extract_domain_knowledge(bottle_record());
  const PromptBundle base = assemble_prompt(q, one_reference(), &k, kAll, FormatMode::kMultipleChoice);
  const std::pair<Ablation, BlockTag> cases[] = {{Ablation::kNoReferenceExtractor, BlockTag::kReferenceImages},
                                                 {Ablation::kNoKnowledgeGuide, BlockTag::kKnowledge},
                                                 {Ablation::kNoReasoningExpert, BlockTag::kReasoningDirective}};
  for (const auto& [ablation, tag] : cases) {
    const PromptBundle p = assemble_prompt(q, one_reference(), &k, apply_ablation(kAll, ablation), FormatMode::kMultipleChoice);
    std::vector<PromptBlock> expected;
    for (const auto& b : base.blocks) {
      if (b.tag != tag) expected.push_back(b);
    }
    CHECK(p.blocks == expected);
    CHECK(p.system_text == base.system_text);
    CHECK(p.attachments.size() == (tag == BlockTag::kReferenceImages ? 1u : 2u));
  }
}

TEST_CASE("format modes differ only in options and answer format") {
  const QueryBundle q = discrimination_query();
  const ContextKnowledge k = extract_domain_knowledge(bottle_record());
  const PromptBundle mc = assemble_prompt(q, one_reference(), &k, kAll, FormatMode::kMultipleChoice);
  const PromptBundle qa = assemble_prompt(q, one_reference(), &k, kAll, FormatMode::kQa);
  const PromptBundle tf = assemble_prompt(q, one_reference(), &k, kAll, FormatMode::kTrueFalse);

  auto without_format = [](const PromptBundle& p) {
    std::vector<PromptBlock> out;
    for (const auto& b : p.blocks) {
      if (b.tag != BlockTag::kOptions && b.tag != BlockTag::kAnswerFormat) out.push_back(b);
    }
    return out;
  };
  CHECK(without_format(mc) == without_format(qa));
  CHECK(without_format(mc) == without_format(tf));
  CHECK(mc.block(BlockTag::kOptions)->content == "Options:\nA. Yes\nB. No");
  CHECK_FALSE(qa.has(BlockTag::kOptions));
  CHECK(tf.block(BlockTag::kOptions)->content == "Options:\nA. True\nB. False");
  CHECK(tf.serialize().find(kTrueFalseStatement) != std::string::npos);
  CHECK(mc.serialize().find(kTrueFalseStatement) == std::string::npos);
}

TEST_CASE("prompt goldens") {
  const ContextKnowledge k = extract_context(bottle_record(), "Is there any defect in the object?",
                                            QuestionType::kDiscrimination);
  for (FormatMode mode : {FormatMode::kMultipleChoice, FormatMode::kQa, FormatMode::kTrueFalse}) {
    const std::string name = "prompt_" + std::string(to_string(mode)) + ".txt";
    CAPTURE(name);
    const std::string text = assemble_prompt(discrimination_query(), one_reference(), &k, kAll, mode).serialize();
    CHECK(text == testing::read_golden(name, text));
    for (int run = 0; run < 3; ++run) {
      CHECK(assemble_prompt(discrimination_query(), one_reference(), &k, kAll, mode).serialize() == text);
    }
  }

  QueryBundle cls = discrimination_query();
  cls.question = "What is the type of the defect?";
  cls.options = {{"A", "Broken large"}, {"B", "Contamination"}, {"C", "Broken small"}, {"D", "No defect"}};
  const ContextKnowledge ck = extract_context(bottle_record(), cls.question, QuestionType::kClassification);
  const std::string text = assemble_prompt(cls, one_reference(), &ck, select_experts(QuestionType::kClassification),
                                           FormatMode::kMultipleChoice)
                               .serialize();
  CHECK(text == testing::read_golden("prompt_classification.txt", text));
  for (const char* letter : {"A. ", "B. ", "C. ", "D. "}) CHECK(text.find(letter) != std::string::npos);
}

TEST_CASE("decision extraction") {
  const QueryBundle q = discrimination_query();
  QueryBundle four = q;
  four.options = {{"A", "Scratch"}, {"B", "Dent"}, {"C", "Crack"}, {"D", "Hole"}};
  const PromptBundle p = assemble_prompt(four, {}, nullptr, ExpertSet{}, FormatMode::kMultipleChoice);

  MockChatBackend says_b(MockScript::parse(R"({"default_reply": "B"})"));
  Decision d = generate_decision(p, says_b, ExpertSet{});
  CHECK(d.extracted_choice == "B");
  CHECK(d.parse_status == ParseStatus::kOk);

  MockChatBackend prose(MockScript::parse(R"({"default_reply": "hard to say from this picture"})"));
  d = generate_decision(p, prose, ExpertSet{});
  CHECK_FALSE(d.extracted_choice.has_value());
  CHECK(d.parse_status == ParseStatus::kParseFailure);

  const PromptBundle qa = assemble_prompt(four, {}, nullptr, ExpertSet{}, FormatMode::kQa);
  MockChatBackend free_text(MockScript::parse(R"({"default_reply": "There is a dent near the neck."})"));
  d = generate_decision(qa, free_text, ExpertSet{});
  CHECK_FALSE(d.extracted_choice.has_value());
  CHECK(d.raw_text == "There is a dent near the neck.");

  MockChatBackend down(MockScript::parse(R"({"rules": [{"contains": "", "error": "unavailable"}]})"));
  d = generate_decision(p, down, ExpertSet{});
  CHECK(d.error_code == ErrorCode::kGatewayUnavailable);
  CHECK(d.parse_status == ParseStatus::kParseFailure);
  CHECK(d.error->find("GatewayUnavailable") != std::string::npos);
}

TEST_CASE("run_query composes the pipeline") {
  VectorMemory m(2);
  m.insert(testing::make_entry(0, {1.0f, 0.0f}));
  m.insert(testing::make_entry(1, {0.0f, 1.0f}));
  const KnowledgeBase kb = {{"bottle", bottle_record()}};
  MockChatBackend mock(MockScript::parse(R"({"rules": [{"contains": "Inspection knowledge", "reply": "A"}],
                                             "default_reply": "B"})"));
  PrecomputedEmbeddings store(2);
  store.add(Modality::kImage, "q.png", Embedding({0.9f, 0.1f}));
  Pipeline pipeline{&m, nullptr, &kb, &mock, &store};
  RunConfig config;

  QueryBundle q;
  q.id = "q1";
  q.query_image = "q.png";
  q.question = "What is the type of the defect?";
  q.options = {{"A", "Broken large"}, {"B", "Contamination"}};
  q.class_name = "bottle";

  const Decision d = run_query(q, pipeline, config);
  CHECK(d.query_id == "q1");
  CHECK(d.qtype == QuestionType::kClassification);
  CHECK(d.experts_used == select_experts(QuestionType::kClassification));
  CHECK(d.extracted_choice == "A");
  CHECK(d.shots_returned == 1);

  const QueryPlan plan = plan_query(q, pipeline, config);
  CHECK(plan.refs.entries[0].id == 0);

  RunConfig no_kg = config;
  no_kg.ablation = Ablation::kNoKnowledgeGuide;
  CHECK_FALSE(plan_query(q, pipeline, no_kg).prompt.has(BlockTag::kKnowledge));
  CHECK(run_query(q, pipeline, no_kg).extracted_choice == "B");

  RunConfig domain = config;
  domain.knowledge_mode = KnowledgeMode::kDomain;
  CHECK(plan_query(q, pipeline, domain).knowledge->sections.size() == 5);
  RunConfig none = config;
  none.knowledge_mode = KnowledgeMode::kNone;
  CHECK_FALSE(plan_query(q, pipeline, none).prompt.has(BlockTag::kKnowledge));

  RunConfig zero_shot = config;
  zero_shot.shots = 0;
  CHECK_FALSE(plan_query(q, pipeline, zero_shot).prompt.has(BlockTag::kReferenceImages));
}

TEST_CASE("localization never touches the memory") {
  VectorMemory anomalous_only(2);
  anomalous_only.insert(testing::make_entry(0, {1.0f, 0.0f}, "bottle", Label::kAnomalous));
  MockChatBackend mock(MockScript::parse(R"({"default_reply": "C"})"));
  Pipeline pipeline{&anomalous_only, nullptr, nullptr, &mock, nullptr};
  QueryBundle q;
  q.id = "loc";
  q.query_image = "q.png";
  q.question = "Where is the defect?";
  q.options = {{"A", "Top"}, {"B", "Bottom"}, {"C", "Left"}};
  q.class_name = "bottle";
  const Decision d = run_query(q, pipeline, RunConfig{});
  CHECK(d.qtype == QuestionType::kLocalization);
  CHECK(d.shots_returned == 0);
  CHECK(d.extracted_choice == "C");

  // The same memory fails a query that does retrieve, and the id is in the message.
  q.question = "Is there any defect in the object?";
  q.query_embedding = Embedding({1.0f, 0.0f});
  try {
    run_query(q, pipeline, RunConfig{});
    FAIL("expected NoNormalSamples");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNoNormalSamples);
    CHECK(std::string(e.what()).find("query loc") != std::string::npos);
  }
}

TEST_CASE("query seeds do not depend on order") {
  CHECK(query_seed(1, "a") == query_seed(1, "a"));
  CHECK(query_seed(1, "a") != query_seed(1, "b"));
  CHECK(query_seed(1, "a") != query_seed(2, "a"));
}
