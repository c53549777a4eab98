#include "echo/eval/harness.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "json.hpp"

#include "echo/error.hpp"
#include "echo/util/binary_io.hpp"

namespace echo {

namespace {

using nlohmann::json;

constexpr const char* kFormatName = "echo-runresult";
constexpr int kFormatVersion = 1;

QueryBundle to_query(const BenchmarkItem& item) {
  QueryBundle q;
  q.id = item.id;
  q.query_image = item.image_path;
  q.question = item.question;
  q.options = item.options;
  q.class_name = item.class_name;
  q.declared_qtype = item.subtask;
  return q;
}

bool runnable(const BenchmarkItem& item, FormatMode mode) {
  return mode != FormatMode::kTrueFalse || true_false_key(item).has_value();
}

json decision_json(const Decision& d) {
  json j = {{"query_id", d.query_id},
            {"qtype", std::string(to_string(d.qtype))},
            {"raw_text", d.raw_text},
            {"extracted_choice", d.extracted_choice ? json(*d.extracted_choice) : json(nullptr)},
            {"parse_status", std::string(to_string(d.parse_status))},
            {"experts_used", to_string(d.experts_used)},
            {"shots_returned", d.shots_returned},
            {"knowledge_fallback", d.knowledge_fallback}};
  j["error"] = d.error ? json(*d.error) : json(nullptr);
  j["error_code"] = d.error_code ? json(std::string(to_string(*d.error_code))) : json(nullptr);
  return j;
}

std::optional<ErrorCode> error_code_from(std::string_view name) {
  for (int c = 0; c <= static_cast<int>(ErrorCode::kInvalidArgument); ++c) {
    if (to_string(static_cast<ErrorCode>(c)) == name) return static_cast<ErrorCode>(c);
  }
  return std::nullopt;
}

QuestionType qtype_from(const std::string& text) {
  auto q = parse_question_type(text);
  if (!q) throw Error(ErrorCode::kParseError, "unknown subtask '" + text + "'");
  return *q;
}

Decision decision_from(const json& j) {
  Decision d;
  d.query_id = j.at("query_id").get<std::string>();
  d.qtype = qtype_from(j.at("qtype").get<std::string>());
  d.raw_text = j.at("raw_text").get<std::string>();
  if (!j.at("extracted_choice").is_null()) d.extracted_choice = j["extracted_choice"].get<std::string>();
  d.parse_status = parse_parse_status(j.at("parse_status").get<std::string>());
  d.experts_used = parse_expert_set(j.at("experts_used").get<std::string>());
  d.shots_returned = j.at("shots_returned").get<std::size_t>();
  d.knowledge_fallback = j.at("knowledge_fallback").get<bool>();
  if (!j.at("error").is_null()) d.error = j["error"].get<std::string>();
  if (!j.at("error_code").is_null()) {
    d.error_code = error_code_from(j["error_code"].get<std::string>());
    if (!d.error_code) throw Error(ErrorCode::kParseError, "unknown error code");
  }
  return d;
}

}  // namespace

std::string serialize_decision(const Decision& decision) {
  json j = decision_json(decision);
  j["timing_ms"] = decision.timing_ms;
  return j.dump(2);
}

std::size_t RunResult::item_errors() const {
  std::size_t n = 0;
  for (const auto& r : records) n += r.note.empty() ? 0 : 1;
  return n;
}

ItemRecord score_item(const BenchmarkItem& item, const Decision& decision, FormatMode mode) {
  ItemRecord r;
  r.item_id = item.id;
  r.dataset = item.dataset;
  r.class_name = item.class_name;
  r.subtask = item.subtask;
  r.decision = decision;
  r.option_count = item.options.size();
  r.answer_key = item.answer_key;

  std::optional<std::string> choice = decision.extracted_choice;
  r.parse_status = decision.parse_status;
  if (mode == FormatMode::kTrueFalse) {
    r.answer_key = true_false_key(item).value_or("");
    r.option_count = 2;
  } else if (mode == FormatMode::kQa) {
    const ChoiceResult m = match_option_text(decision.raw_text, item.options);
    choice = m.letter;
    r.parse_status = m.status;
  }
  if (decision.error) {
    choice.reset();
    r.parse_status = ParseStatus::kParseFailure;
    r.note = *decision.error;
  }
  r.correct = r.parse_status != ParseStatus::kParseFailure && choice && *choice == r.answer_key;
  return r;
}

RunResult run_eval(const std::vector<BenchmarkItem>& items, const Pipeline& pipeline, const RunConfig& config) {
  return run_eval(items, pipeline, config, nullptr);
}

RunResult run_eval(const std::vector<BenchmarkItem>& items, const Pipeline& pipeline, const RunConfig& config,
                   const ProgressFn& progress) {
  RunResult result;
  result.seed = config.seed;
  result.format_mode = config.format_mode;
  result.config = config_snapshot(config);

  std::vector<const BenchmarkItem*> work;
  for (const auto& item : items) {
    if (runnable(item, config.format_mode)) {
      work.push_back(&item);
    } else {
      ++result.skipped_items;
    }
  }

  // Each slot is written by exactly one worker; aggregation happens after join.
  std::vector<ItemRecord> slots(work.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::atomic<bool> abort{false};
  std::exception_ptr config_failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    while (!abort.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= work.size()) return;
      const BenchmarkItem& item = *work[i];
      try {
        slots[i] = score_item(item, run_query(to_query(item), pipeline, config), config.format_mode);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kConfigError) {
          std::lock_guard lock(failure_mutex);
          if (!config_failure) config_failure = std::current_exception();
          abort = true;
          return;
        }
        Decision d;
        d.query_id = item.id;
        d.qtype = item.subtask;
        d.error = e.what();
        d.error_code = e.code();
        slots[i] = score_item(item, d, config.format_mode);
      }
      if (progress) progress(done.fetch_add(1) + 1, work.size());
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(config.parallelism, work.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (config_failure) std::rethrow_exception(config_failure);
  result.records = std::move(slots);
  return result;
}

std::string serialize_run_result(const RunResult& result) {
  json config = json::array();
  for (const auto& [k, v] : result.config) config.push_back({k, v});
  json records = json::array();
  for (const auto& r : result.records) {
    records.push_back({{"item_id", r.item_id},
                       {"dataset", r.dataset},
                       {"class_name", r.class_name},
                       {"subtask", std::string(to_string(r.subtask))},
                       {"answer_key", r.answer_key},
                       {"option_count", r.option_count},
                       {"correct", r.correct},
                       {"parse_status", std::string(to_string(r.parse_status))},
                       {"note", r.note},
                       {"decision", decision_json(r.decision)}});
  }
  const json doc = {{"format", kFormatName},
                    {"version", kFormatVersion},
                    {"seed", result.seed},
                    {"format_mode", std::string(to_string(result.format_mode))},
                    {"skipped_items", result.skipped_items},
                    {"config", config},
                    {"records", records}};
  return doc.dump(1) + "\n";
}

RunResult parse_run_result(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.value("format", "") != kFormatName) throw Error(ErrorCode::kParseError, "not a run result file");
    if (doc.at("version").get<int>() != kFormatVersion) {
      throw Error(ErrorCode::kFormatVersionMismatch, "unsupported run result version");
    }
    RunResult r;
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.format_mode = parse_format_mode(doc.at("format_mode").get<std::string>());
    r.skipped_items = doc.at("skipped_items").get<std::size_t>();
    for (const auto& kv : doc.at("config")) r.config.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
    for (const auto& j : doc.at("records")) {
      ItemRecord rec;
      rec.item_id = j.at("item_id").get<std::string>();
      rec.dataset = j.at("dataset").get<std::string>();
      rec.class_name = j.at("class_name").get<std::string>();
      rec.subtask = qtype_from(j.at("subtask").get<std::string>());
      rec.answer_key = j.at("answer_key").get<std::string>();
      rec.option_count = j.at("option_count").get<std::size_t>();
      rec.correct = j.at("correct").get<bool>();
      rec.parse_status = parse_parse_status(j.at("parse_status").get<std::string>());
      rec.note = j.at("note").get<std::string>();
      rec.decision = decision_from(j.at("decision"));
      if (rec.correct && rec.parse_status == ParseStatus::kParseFailure) {
        throw Error(ErrorCode::kParseError, "record " + rec.item_id + " is correct with parse_failure");
      }
      r.records.push_back(std::move(rec));
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("run result: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kFormatVersionMismatch) throw;
    throw Error(ErrorCode::kParseError, "run result: " + std::string(e.message()));
  }
}

void save_run_result(const RunResult& result, const std::string& path) {
  const std::string text = serialize_run_result(result);
  util::write_file(path, std::as_bytes(std::span(text.data(), text.size())));
}

RunResult load_run_result(const std::string& path) {
  const auto bytes = util::read_file(path);
  return parse_run_result(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace echo
