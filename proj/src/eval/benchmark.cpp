#include "echo/eval/benchmark.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"

#include "echo/error.hpp"
#include "echo/util/binary_io.hpp"

namespace echo {

namespace {

using nlohmann::json;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string require_string(const json& object, const char* key) {
  auto it = object.find(key);
  if (it == object.end()) throw Error(ErrorCode::kParseError, std::string("missing field '") + key + "'");
  if (!it->is_string()) throw Error(ErrorCode::kParseError, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

bool out_of_scope(std::string_view subtask) {
  const std::string s = lower(subtask);
  return s == "object classification" || s == "object analysis";
}

const std::set<std::string> kKnownFields = {"id",     "dataset",  "image_path", "class_name", "subtask",
                                            "question", "options", "answer",     "meta"};

BenchmarkItem parse_item(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::kParseError, "record must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!kKnownFields.contains(key)) throw Error(ErrorCode::kParseError, "unknown field '" + key + "'");
  }
  BenchmarkItem item;
  item.id = require_string(doc, "id");
  if (item.id.empty()) throw Error(ErrorCode::kParseError, "id must be non-empty");
  item.dataset = doc.contains("dataset") ? require_string(doc, "dataset") : std::string("default");
  item.image_path = require_string(doc, "image_path");
  item.class_name = require_string(doc, "class_name");
  if (item.class_name.empty()) throw Error(ErrorCode::kParseError, "class_name must be non-empty");
  const std::string subtask = require_string(doc, "subtask");
  const auto qtype = parse_question_type(subtask);
  if (!qtype) throw Error(ErrorCode::kParseError, "unknown subtask '" + subtask + "'");
  item.subtask = *qtype;
  item.question = require_string(doc, "question");

  auto options = doc.find("options");
  if (options == doc.end() || !options->is_object()) throw Error(ErrorCode::kParseError, "options must be an object");
  // nlohmann orders object keys, so "A" < "B" < ... is the letter order.
  for (const auto& [letter, text] : options->items()) {
    if (!text.is_string()) throw Error(ErrorCode::kParseError, "option " + letter + " must be a string");
    item.options.push_back({letter, text.get<std::string>()});
  }
  for (std::size_t i = 0; i < item.options.size(); ++i) {
    if (item.options[i].letter != std::string(1, char('A' + i))) {
      throw Error(ErrorCode::kParseError, "option letters must run A, B, C, ... without gaps");
    }
  }
  const std::size_t n = item.options.size();
  if (item.subtask == QuestionType::kDiscrimination ? n != 2 : (n < 2 || n > 4)) {
    throw Error(ErrorCode::kParseError, std::string(to_string(item.subtask)) + " item has " + std::to_string(n) +
                                            " options");
  }
  item.answer_key = require_string(doc, "answer");
  if (item.answer_key.size() != 1 || item.answer_key[0] < 'A' || std::size_t(item.answer_key[0] - 'A') >= n) {
    throw Error(ErrorCode::kParseError, "answer '" + item.answer_key + "' is not an option letter");
  }
  if (auto it = doc.find("meta"); it != doc.end()) {
    if (!it->is_object()) throw Error(ErrorCode::kParseError, "meta must be an object");
    for (const auto& [k, v] : it->items()) item.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
  }
  return item;
}

bool is_remote(const std::string& uri) { return uri.starts_with("http://") || uri.starts_with("https://"); }

}  // namespace

Benchmark parse_benchmark(std::string_view text, const std::string& source, MissingImagePolicy policy,
                          const std::string& image_root) {
  Benchmark out;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    try {
      const json doc = json::parse(line);
      if (doc.is_object() && doc.contains("subtask") && doc["subtask"].is_string() &&
          out_of_scope(doc["subtask"].get<std::string>())) {
        ++out.skipped_out_of_scope;
        continue;
      }
      BenchmarkItem item = parse_item(doc);
      if (!ids.insert(item.id).second) throw Error(ErrorCode::kParseError, "duplicate id '" + item.id + "'");
      if (policy != MissingImagePolicy::kIgnore && !is_remote(item.image_path)) {
        const std::string resolved = resolve_image_uri(image_root, item.image_path);
        if (!std::filesystem::exists(resolved)) {
          if (policy == MissingImagePolicy::kFail) {
            throw Error(ErrorCode::kMissingImage, "image not found: " + resolved);
          }
          ++out.missing_images;
          out.warnings.push_back(where + ": image not found: " + resolved);
        }
      }
      out.items.push_back(std::move(item));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParseError, where + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + std::string(e.message()));
    }
  }
  if (out.skipped_out_of_scope > 0) {
    out.warnings.push_back(source + ": skipped " + std::to_string(out.skipped_out_of_scope) +
                           " object classification/analysis item(s)");
  }
  return out;
}

Benchmark load_benchmark(const std::string& path, MissingImagePolicy policy, const std::string& image_root) {
  const auto bytes = util::read_file(path);
  const std::string text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  std::string root = image_root;
  if (root.empty()) root = std::filesystem::path(path).parent_path().string();
  return parse_benchmark(text, path, policy, root);
}

std::string benchmark_line(const BenchmarkItem& item) {
  json options = json::object();
  for (const auto& o : item.options) options[o.letter] = o.text;
  json doc = {{"id", item.id},           {"dataset", item.dataset},   {"image_path", item.image_path},
              {"class_name", item.class_name}, {"subtask", std::string(to_string(item.subtask))},
              {"question", item.question}, {"options", options},        {"answer", item.answer_key}};
  if (!item.meta.empty()) doc["meta"] = item.meta;
  return doc.dump();
}

void save_benchmark(const std::vector<BenchmarkItem>& items, const std::string& path) {
  std::string text;
  for (const auto& item : items) text += benchmark_line(item) + "\n";
  util::write_file(path, std::as_bytes(std::span(text.data(), text.size())));
}

bool is_no_defect_option(std::string_view text) {
  std::string t = lower(text);
  while (!t.empty() && !std::isalpha(static_cast<unsigned char>(t.back()))) t.pop_back();
  std::size_t start = 0;
  while (start < t.size() && !std::isalpha(static_cast<unsigned char>(t[start]))) ++start;
  t = t.substr(start);
  static const std::set<std::string> kExact = {"no", "none", "normal", "good", "defect-free", "defect free"};
  if (kExact.contains(t)) return true;
  return t.starts_with("no ") || t.starts_with("no,") || t.starts_with("no.") || t.starts_with("normal ");
}

std::optional<std::string> true_false_key(const BenchmarkItem& item) {
  if (item.subtask != QuestionType::kDiscrimination) return std::nullopt;
  std::optional<std::string> no_defect;
  for (const auto& o : item.options) {
    if (is_no_defect_option(o.text)) {
      if (no_defect) return std::nullopt;
      no_defect = o.letter;
    }
  }
  if (!no_defect) return std::nullopt;
  return item.answer_key == *no_defect ? "A" : "B";
}

}  // namespace echo
