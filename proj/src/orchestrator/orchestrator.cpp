#include "echo/orchestrator/orchestrator.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <random>

#include "echo/error.hpp"
#include "echo/util/codec.hpp"

namespace echo {

namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool is_gateway_error(ErrorCode code) {
  return code == ErrorCode::kGatewayUnavailable || code == ErrorCode::kGatewayTimeout ||
         code == ErrorCode::kMalformedResponse;
}

constexpr std::string_view kSystemText =
    "You are an expert industrial quality inspector. You examine images of manufactured products and answer "
    "questions about anomalies and defects.";

std::string reference_text(std::size_t n) {
  if (n == 1) {
    return "Image 1 is a defect-free reference sample of the same object. The last image is the query image. "
           "Use the reference to tell real defects apart from acceptable variation.";
  }
  return "Images 1 to " + std::to_string(n) +
         " are defect-free reference samples of the same object. The last image is the query image. "
         "Use the references to tell real defects apart from acceptable variation.";
}

constexpr std::string_view kReasoningDirective =
    "Think step by step. First describe what you see in the query image, then check it against the reference "
    "samples and knowledge provided, and only then give your final answer.";

std::string options_text(const std::vector<AnswerOption>& options) {
  std::string out = "Options:";
  for (const AnswerOption& o : options) out += "\n" + o.letter + ". " + o.text;
  return out;
}

std::string answer_format_text(FormatMode mode) {
  switch (mode) {
    case FormatMode::kMultipleChoice: return "Answer with the letter of the correct option only.";
    case FormatMode::kQa: return "Answer the question in one or two sentences.";
    case FormatMode::kTrueFalse:
      return "Is the following statement true or false? \"" + std::string(kTrueFalseStatement) +
             "\" Answer with the letter of your choice only.";
  }
  return "";
}

}  // namespace

void validate_options(const std::vector<AnswerOption>& options) {
  for (std::size_t i = 0; i < options.size(); ++i) {
    const std::string expected(1, static_cast<char>('A' + i));
    if (i >= 26 || options[i].letter != expected) {
      throw Error(ErrorCode::kInvalidArgument, "option letters must run A, B, C, ... (got '" + options[i].letter + "')");
    }
  }
}

QuestionType classify_question(std::string_view question, const std::vector<AnswerOption>&,
                               std::optional<QuestionType> declared) {
  if (declared) return *declared;
  const std::string q = lower(question);
  auto has = [&](std::initializer_list<std::string_view> needles) {
    return std::any_of(needles.begin(), needles.end(), [&](std::string_view n) { return q.find(n) != std::string::npos; });
  };
  if (has({"any defect", "anomal"})) return QuestionType::kDiscrimination;
  if (has({"type of the defect"})) return QuestionType::kClassification;
  if (has({"where", "location", "which region"})) return QuestionType::kLocalization;
  if (has({"appearance", "look like", "describe"})) return QuestionType::kDescription;
  if (has({"effect", "cause", "impact"})) return QuestionType::kAnalysis;
  return QuestionType::kDiscrimination;
}

ExpertSet select_experts(QuestionType qtype, const ExpertMapping& mapping) {
  auto it = mapping.find(qtype);
  return it == mapping.end() ? ExpertSet{} : it->second;
}

ExpertSet apply_ablation(ExpertSet experts, Ablation ablation) {
  switch (ablation) {
    case Ablation::kNone: break;
    case Ablation::kNoReferenceExtractor: experts.reference_extractor = false; break;
    case Ablation::kNoKnowledgeGuide: experts.knowledge_guide = false; break;
    case Ablation::kNoReasoningExpert: experts.reasoning_expert = false; break;
    case Ablation::kNoAll: experts = ExpertSet{}; break;
  }
  return experts;
}

std::uint64_t query_seed(std::uint64_t run_seed, std::string_view query_id) {
  return run_seed ^ util::fnv1a64(query_id);
}

ReferenceResult retrieve_reference(const VectorMemory& memory, const HnswIndex* index, const Embedding& query,
                                   const std::optional<std::string>& class_name, std::size_t shots, ShotMode mode,
                                   std::uint64_t seed) {
  ReferenceResult out;
  out.shots_requested = shots;
  if (shots == 0) return out;

  const EntryFilter in_pool = [&class_name](const EntryInfo& e) {
    return e.label == Label::kNormal && e.modality == Modality::kImage && (!class_name || e.class_name == *class_name);
  };
  std::vector<EntryId> pool;
  for (std::size_t r : memory.rows_by_id()) {
    if (in_pool(memory.info_at(r))) pool.push_back(memory.info_at(r).id);
  }
  if (pool.empty()) {
    throw Error(ErrorCode::kNoNormalSamples,
                "no normal image entries" + (class_name ? " for class '" + *class_name + "'" : std::string()));
  }
  const std::size_t want = std::min(shots, pool.size());

  std::vector<ScoredId> ranked;
  if (mode == ShotMode::kRandom) {
    // Partial Fisher-Yates over the id-sorted pool, drawing raw engine output so
    // the sample does not depend on the standard library's distributions.
    std::mt19937_64 engine(seed);
    for (std::size_t i = 0; i < want; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(engine() % (pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    const PreparedQuery prepared = memory.prepare(query);
    for (std::size_t i = 0; i < want; ++i) ranked.push_back({pool[i], memory.score_row(prepared, *memory.row_of(pool[i]))});
    std::sort(ranked.begin(), ranked.end(), ranks_before);
  } else if (index != nullptr && !index->empty()) {
    // A selective filter can starve a narrow beam; widen until the pool is covered.
    std::size_t ef = std::max(index->params().ef_search, shots);
    for (;;) {
      ranked = index->search(query, shots, ef, in_pool);
      if (ranked.size() >= want || ef >= index->size()) break;
      ef = std::min(ef * 2, index->size());
    }
    if (ranked.size() < want) ranked = memory.brute_force_top_k(query, shots, in_pool);
  } else {
    ranked = memory.brute_force_top_k(query, shots, in_pool);
  }

  for (const ScoredId& s : ranked) {
    out.entries.push_back(memory.entry(s.id));
    out.scores.push_back(s.score);
  }
  out.shots_returned = out.entries.size();
  return out;
}

std::string_view to_string(BlockTag tag) {
  switch (tag) {
    case BlockTag::kReferenceImages: return "reference_images";
    case BlockTag::kKnowledge: return "knowledge";
    case BlockTag::kReasoningDirective: return "reasoning_directive";
    case BlockTag::kQuestion: return "question";
    case BlockTag::kOptions: return "options";
    case BlockTag::kAnswerFormat: return "answer_format";
  }
  return "";
}

bool PromptBundle::has(BlockTag tag) const { return block(tag) != nullptr; }

const PromptBlock* PromptBundle::block(BlockTag tag) const {
  for (const PromptBlock& b : blocks) {
    if (b.tag == tag) return &b;
  }
  return nullptr;
}

std::string PromptBundle::serialize() const {
  std::string out = "=== system\n" + system_text + "\n";
  for (const PromptBlock& b : blocks) {
    out += "=== ";
    out += to_string(b.tag);
    out += "\n";
    out += b.content;
    out += "\n";
  }
  out += "=== attachments\n";
  for (std::size_t i = 0; i < attachments.size(); ++i) {
    out += std::to_string(i + 1) + ". " + attachments[i].mime_type + " " + attachments[i].uri + "\n";
  }
  return out;
}

ChatRequest PromptBundle::to_request(std::size_t max_tokens) const {
  ChatRequest request;
  request.system_text = system_text;
  for (const PromptBlock& b : blocks) request.user_blocks.push_back(b.content);
  request.images = attachments;
  request.max_tokens = max_tokens;
  request.temperature = 0.0;
  return request;
}

std::vector<AnswerOption> true_false_options() { return {{"A", "True"}, {"B", "False"}}; }

PromptBundle assemble_prompt(const QueryBundle& query, const ReferenceResult& refs, const ContextKnowledge* knowledge,
                             const ExpertSet& experts, FormatMode format_mode) {
  validate_options(query.options);
  if (format_mode == FormatMode::kMultipleChoice && query.options.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "multiple_choice mode needs answer options");
  }

  PromptBundle out;
  out.system_text = std::string(kSystemText);
  const bool with_refs = experts.reference_extractor && !refs.entries.empty();
  if (with_refs) {
    out.blocks.push_back({BlockTag::kReferenceImages, reference_text(refs.entries.size())});
    for (const MemoryEntry& e : refs.entries) out.attachments.push_back({mime_type_for(e.source_uri), e.source_uri, ""});
  }
  if (experts.knowledge_guide && knowledge != nullptr && !knowledge->empty()) {
    out.blocks.push_back({BlockTag::kKnowledge, "Inspection knowledge for " + knowledge->class_name + ":\n" +
                                                    knowledge->render()});
  }
  if (experts.reasoning_expert) out.blocks.push_back({BlockTag::kReasoningDirective, std::string(kReasoningDirective)});
  out.blocks.push_back({BlockTag::kQuestion, "Question: " + query.question});
  switch (format_mode) {
    case FormatMode::kMultipleChoice: out.options = query.options; break;
    case FormatMode::kTrueFalse: out.options = true_false_options(); break;
    case FormatMode::kQa: break;
  }
  if (!out.options.empty()) out.blocks.push_back({BlockTag::kOptions, options_text(out.options)});
  out.blocks.push_back({BlockTag::kAnswerFormat, answer_format_text(format_mode)});
  out.attachments.push_back({mime_type_for(query.query_image), query.query_image, ""});
  return out;
}

Decision generate_decision(const PromptBundle& prompt, ChatBackend& gateway, const ExpertSet& experts,
                           std::size_t max_tokens) {
  Decision d;
  d.experts_used = experts;
  const auto start = std::chrono::steady_clock::now();
  try {
    d.raw_text = gateway.chat(prompt.to_request(max_tokens));
  } catch (const Error& e) {
    if (!is_gateway_error(e.code())) throw;
    d.error = e.what();
    d.error_code = e.code();
  }
  d.timing_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  if (!d.error && !prompt.options.empty()) {
    const ChoiceResult choice = extract_choice(d.raw_text, prompt.options);
    d.extracted_choice = choice.letter;
    d.parse_status = choice.status;
  }
  return d;
}

QueryPlan plan_query(const QueryBundle& query, const Pipeline& pipeline, const RunConfig& config) {
  QueryPlan plan;
  plan.qtype = classify_question(query.question, query.options, query.declared_qtype);
  plan.experts = apply_ablation(select_experts(plan.qtype, config.experts), config.ablation);

  if (plan.experts.reference_extractor && config.shots > 0) {
    if (pipeline.memory == nullptr) throw Error(ErrorCode::kConfigError, "reference retrieval needs a memory file");
    Embedding embedding;
    if (query.query_embedding) {
      embedding = *query.query_embedding;
    } else if (pipeline.embeddings != nullptr) {
      embedding = pipeline.embeddings->embed_image(query.query_image);
    } else {
      throw Error(ErrorCode::kConfigError, "reference retrieval needs query embeddings");
    }
    plan.refs = retrieve_reference(*pipeline.memory, pipeline.index, embedding, query.class_name, config.shots,
                                   config.shot_mode, query_seed(config.seed, query.id));
  }

  if (plan.experts.knowledge_guide && config.knowledge_mode != KnowledgeMode::kNone && pipeline.knowledge != nullptr &&
      query.class_name) {
    auto it = pipeline.knowledge->find(*query.class_name);
    if (it != pipeline.knowledge->end()) {
      ExtractionOptions options;
      options.budget = config.knowledge_budget;
      options.max_tokens = config.max_tokens;
      if (config.knowledge_mode == KnowledgeMode::kDomain) {
        plan.knowledge = extract_domain_knowledge(it->second, options);
      } else if (config.knowledge_extractor == KnowledgeExtractor::kModel && pipeline.chat != nullptr) {
        plan.knowledge = extract_context_via_model(it->second, query.question, plan.qtype, *pipeline.chat, options);
      } else {
        plan.knowledge = extract_context(it->second, query.question, plan.qtype, options);
      }
    }
  }

  plan.prompt = assemble_prompt(query, plan.refs, plan.knowledge ? &*plan.knowledge : nullptr, plan.experts,
                                config.format_mode);
  // Embedding lookups use the URIs as stored; only what gets sent is resolved.
  for (ImagePart& part : plan.prompt.attachments) part.uri = resolve_image_uri(config.image_root, part.uri);
  return plan;
}

std::string resolve_image_uri(const std::string& image_root, const std::string& uri) {
  if (image_root.empty() || uri.empty() || uri.starts_with("http://") || uri.starts_with("https://")) return uri;
  const std::filesystem::path p(uri);
  if (p.is_absolute()) return uri;
  return (std::filesystem::path(image_root) / p).lexically_normal().string();
}

Decision run_query(const QueryBundle& query, const Pipeline& pipeline, const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  try {
    if (pipeline.chat == nullptr) throw Error(ErrorCode::kConfigError, "no chat backend configured");
    const QueryPlan plan = plan_query(query, pipeline, config);
    Decision d = generate_decision(plan.prompt, *pipeline.chat, plan.experts, config.max_tokens);
    d.query_id = query.id;
    d.qtype = plan.qtype;
    d.shots_returned = plan.refs.shots_returned;
    d.knowledge_fallback = plan.knowledge && plan.knowledge->used_fallback;
    d.timing_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    return d;
  } catch (const Error& e) {
    throw Error(e.code(), "query " + query.id + ": " + std::string(e.message()));
  }
}

}  // namespace echo
