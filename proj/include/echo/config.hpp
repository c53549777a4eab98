#pragma once

// Run configuration: a flat "key = value" file, '#' starts a comment. Every key
// is optional and unknown keys are errors. Relative paths in a file resolve
// against that file's directory; paths given as overrides resolve against the
// working directory. The full key list is in README.md.

#include <chrono>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "echo/index/hnsw.hpp"
#include "echo/orchestrator/types.hpp"

namespace echo {

enum class GatewayKind { kMock, kHttp };
enum class MissingImagePolicy { kWarn, kFail, kIgnore };

struct GridAxes {
  std::vector<FormatMode> format_modes;
  std::vector<KnowledgeMode> knowledge_modes;
  std::vector<std::size_t> shots;
  std::vector<ShotMode> shot_modes;
  std::vector<Ablation> ablations;
};

struct RunConfig {
  // model gateway
  GatewayKind gateway = GatewayKind::kMock;
  std::string mock_script;       // empty: every reply is the empty string
  std::string endpoint;
  std::string model;
  std::string api_key_env = "ECHO_API_KEY";
  std::chrono::milliseconds timeout{30000};
  int retries = 2;
  std::size_t pool_size = 4;
  std::size_t max_tokens = 512;

  // embeddings: a precomputed store (memory file or manifest) or an http service
  std::string embeddings;
  std::string embedding_endpoint;
  std::size_t dim = 512;

  // data
  std::string memory;
  std::string index;
  std::string knowledge;
  std::string benchmark;
  std::string image_root;
  std::string output_dir = "out";
  MissingImagePolicy missing_image = MissingImagePolicy::kWarn;

  // pipeline
  std::size_t shots = 1;
  ShotMode shot_mode = ShotMode::kRetrieved;
  KnowledgeMode knowledge_mode = KnowledgeMode::kContext;
  KnowledgeExtractor knowledge_extractor = KnowledgeExtractor::kRule;
  std::size_t knowledge_budget = 1200;
  FormatMode format_mode = FormatMode::kMultipleChoice;
  Ablation ablation = Ablation::kNone;
  ExpertMapping experts = default_expert_mapping();
  HnswParams hnsw;
  std::size_t parallelism = 1;
  std::uint64_t seed = 0;

  GridAxes grid;
};

// Applies one "key=value" setting. Throws kConfigError for unknown keys or bad values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value, const std::string& base_dir = {});
void apply_override(RunConfig& config, std::string_view assignment);  // "key=value"

RunConfig parse_config(std::string_view text, const std::string& base_dir = {});
RunConfig load_config(const std::string& path);

// Every key with its current value, in documentation order.
std::vector<std::pair<std::string, std::string>> config_snapshot(const RunConfig& config);
std::vector<std::string> config_keys();

}  // namespace echo
