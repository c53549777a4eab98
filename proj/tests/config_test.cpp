#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "echo/config.hpp"
#include "echo/error.hpp"

using namespace echo;

namespace {

std::string config_error(std::string_view text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfigError);
    return e.what();
  }
  FAIL("expected ConfigError");
  return {};
}

}  // namespace

TEST_CASE("defaults") {
  const RunConfig c;
  CHECK(c.gateway == GatewayKind::kMock);
  CHECK(c.shots == 1);
  CHECK(c.shot_mode == ShotMode::kRetrieved);
  CHECK(c.knowledge_mode == KnowledgeMode::kContext);
  CHECK(c.format_mode == FormatMode::kMultipleChoice);
  CHECK(c.ablation == Ablation::kNone);
  CHECK(c.experts == default_expert_mapping());
  CHECK(c.dim == 512);
}

TEST_CASE("parsing a config file") {
  const RunConfig c = parse_config(R"(
# offline run
gateway = mock
mock_script = scripts/mock.json   # relative to the config
shots = 3
shot_mode = random
knowledge_mode = domain
format_mode = true_false
ablation = w/o_KG
experts.Localization = REx,DM
hnsw.m = 8
hnsw.ef_search = 64
parallelism = 4
seed = 99
grid.shots = 0, 1, 2
grid.ablation = none,w/o_REr
)",
                                   "/data/run");
  CHECK(c.mock_script == "/data/run/scripts/mock.json");
  CHECK(c.shots == 3);
  CHECK(c.shot_mode == ShotMode::kRandom);
  CHECK(c.knowledge_mode == KnowledgeMode::kDomain);
  CHECK(c.format_mode == FormatMode::kTrueFalse);
  CHECK(c.ablation == Ablation::kNoKnowledgeGuide);
  CHECK(c.experts.at(QuestionType::kLocalization) == ExpertSet{false, false, true});
  CHECK(c.experts.at(QuestionType::kDiscrimination) == default_expert_mapping().at(QuestionType::kDiscrimination));
  CHECK(c.hnsw.m == 8);
  CHECK(c.hnsw.m0 == 16);
  CHECK(c.hnsw.ef_search == 64);
  CHECK(c.parallelism == 4);
  CHECK(c.seed == 99);
  CHECK(c.grid.shots == std::vector<std::size_t>{0, 1, 2});
  CHECK(c.grid.ablations == std::vector<Ablation>{Ablation::kNone, Ablation::kNoReferenceExtractor});
}

TEST_CASE("errors carry the line number and reject unknown keys") {
  CHECK(config_error("shots = 1\nshotz = 2\n") == "ConfigError: line 2: unknown config key 'shotz'");
  CHECK(config_error("shots = many").find("line 1: bad value 'many' for shots") != std::string::npos);
  CHECK(config_error("just words").find("expected key = value") != std::string::npos);
  CHECK(config_error("experts.Discrimination = REr").find("DM") != std::string::npos);
  CHECK(config_error("parallelism = 0").find("must be positive") != std::string::npos);
  CHECK(config_error("ablation = w/o_DM").find("line 1") != std::string::npos);
  CHECK(config_error("gateway = grpc").find("expected mock or http") != std::string::npos);
}

TEST_CASE("overrides") {
  RunConfig c;
  apply_override(c, "shots=0");
  apply_override(c, " format_mode = qa ");
  apply_override(c, "mock_script=rel/mock.json");
  CHECK(c.shots == 0);
  CHECK(c.format_mode == FormatMode::kQa);
  CHECK(c.mock_script == "rel/mock.json");
  CHECK_THROWS_AS(apply_override(c, "shots"), Error);
  CHECK_THROWS_AS(apply_override(c, "nope=1"), Error);
}

TEST_CASE("snapshot round-trips every key") {
  RunConfig c = parse_config("shots=2\nablation=w/o_all\nhnsw.level_multiplier=0.3\ngrid.format_mode=qa,true_false\n");
  const auto snap = config_snapshot(c);
  CHECK(snap.size() == config_keys().size());
  std::string text;
  for (const auto& [k, v] : snap) text += k + " = " + v + "\n";
  const RunConfig back = parse_config(text);
  CHECK(config_snapshot(back) == snap);
  CHECK(back.hnsw.level_multiplier == c.hnsw.level_multiplier);
}

TEST_CASE("load_config resolves against the file's directory") {
  const auto dir = std::filesystem::temp_directory_path() / "echo_config_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "run.cfg") << "memory = mem.echomem\nbenchmark = /abs/bench.jsonl\n";
  }
  const RunConfig c = load_config((dir / "run.cfg").string());
  CHECK(c.memory == (dir / "mem.echomem").string());
  CHECK(c.benchmark == "/abs/bench.jsonl");
  try {
    load_config((dir / "missing.cfg").string());
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfigError);
  }
  std::filesystem::remove_all(dir);
}
