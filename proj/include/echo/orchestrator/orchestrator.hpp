#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "echo/config.hpp"
#include "echo/eval/answer.hpp"
#include "echo/gateway/chat.hpp"
#include "echo/gateway/embedding.hpp"
#include "echo/index/hnsw.hpp"
#include "echo/knowledge/knowledge_base.hpp"
#include "echo/memory/vector_memory.hpp"
#include "echo/orchestrator/types.hpp"

namespace echo {

// X = {I_q, T_q} plus answer options.
struct QueryBundle {
  std::string id;
  std::string query_image;                    // path or URI of I_q
  std::optional<Embedding> query_embedding;   // looked up from the embedding backend when absent
  std::string question;                       // T_q
  std::vector<AnswerOption> options;          // letters consecutive from "A"; may be empty
  std::optional<std::string> class_name;
  std::optional<QuestionType> declared_qtype;
};

void validate_options(const std::vector<AnswerOption>& options);  // throws kInvalidArgument

// Declared type when given, else the first keyword rule that fires.
QuestionType classify_question(std::string_view question, const std::vector<AnswerOption>& options = {},
                               std::optional<QuestionType> declared = std::nullopt);

ExpertSet select_experts(QuestionType qtype, const ExpertMapping& mapping = default_expert_mapping());
ExpertSet apply_ablation(ExpertSet experts, Ablation ablation);

struct ReferenceResult {
  std::vector<MemoryEntry> entries;  // I_r, best first; all normal images
  std::vector<double> scores;        // cosine to the query, non-increasing
  std::size_t shots_requested = 0;
  std::size_t shots_returned = 0;
};

// Pool: normal image entries, restricted to class_name when given. Retrieved
// mode ranks the pool by cosine (through the index when one is supplied);
// random mode draws a seeded uniform sample and returns it best first.
// Throws kNoNormalSamples when shots > 0 and the pool is empty.
ReferenceResult retrieve_reference(const VectorMemory& memory, const HnswIndex* index, const Embedding& query,
                                   const std::optional<std::string>& class_name, std::size_t shots,
                                   ShotMode mode = ShotMode::kRetrieved, std::uint64_t seed = 0);

enum class BlockTag { kReferenceImages, kKnowledge, kReasoningDirective, kQuestion, kOptions, kAnswerFormat };
std::string_view to_string(BlockTag tag);

struct PromptBlock {
  BlockTag tag;
  std::string content;

  friend bool operator==(const PromptBlock&, const PromptBlock&) = default;
};

struct PromptBundle {
  std::string system_text;
  std::vector<PromptBlock> blocks;      // in BlockTag order
  std::vector<ImagePart> attachments;   // reference images first, query image last
  std::vector<AnswerOption> options;    // what the reply is scored against; empty in qa mode

  bool has(BlockTag tag) const;
  const PromptBlock* block(BlockTag tag) const;
  std::string serialize() const;        // byte-stable text form, used for goldens
  ChatRequest to_request(std::size_t max_tokens = 512) const;
};

inline constexpr std::string_view kTrueFalseStatement =
    "The query image contains no anomalies or defects compared to the normal sample.";

// Options presented in true_false mode.
std::vector<AnswerOption> true_false_options();

PromptBundle assemble_prompt(const QueryBundle& query, const ReferenceResult& refs,
                             const ContextKnowledge* knowledge, const ExpertSet& experts, FormatMode format_mode);

// D = F(X).
struct Decision {
  std::string query_id;
  QuestionType qtype = QuestionType::kDiscrimination;
  std::string raw_text;
  std::optional<std::string> extracted_choice;
  ParseStatus parse_status = ParseStatus::kParseFailure;
  ExpertSet experts_used;
  std::int64_t timing_ms = 0;
  std::optional<std::string> error;      // gateway failure, reported instead of thrown
  std::optional<ErrorCode> error_code;
  std::size_t shots_returned = 0;
  bool knowledge_fallback = false;
};

// Gateway failures land in Decision::error. The choice is extracted only when
// the prompt carries options.
Decision generate_decision(const PromptBundle& prompt, ChatBackend& gateway, const ExpertSet& experts,
                           std::size_t max_tokens = 512);

// Shared read-only state for a run. Pointers may be null when the
// configuration never needs them.
struct Pipeline {
  const VectorMemory* memory = nullptr;
  const HnswIndex* index = nullptr;
  const KnowledgeBase* knowledge = nullptr;
  ChatBackend* chat = nullptr;
  EmbeddingBackend* embeddings = nullptr;
};

// classify -> select experts -> ablate -> retrieve -> extract knowledge ->
// assemble -> decide. Component failures other than gateway errors are
// rethrown with the query id in the message.
Decision run_query(const QueryBundle& query, const Pipeline& pipeline, const RunConfig& config);

// Everything run_query decides before calling the gateway.
struct QueryPlan {
  QuestionType qtype = QuestionType::kDiscrimination;
  ExpertSet experts;
  ReferenceResult refs;
  std::optional<ContextKnowledge> knowledge;
  PromptBundle prompt;
};
QueryPlan plan_query(const QueryBundle& query, const Pipeline& pipeline, const RunConfig& config);

// image_root / uri for relative file paths; absolute paths and URLs unchanged.
std::string resolve_image_uri(const std::string& image_root, const std::string& uri);

// Per-query seed for random shots; independent of scheduling order.
std::uint64_t query_seed(std::uint64_t run_seed, std::string_view query_id);

}  // namespace echo
