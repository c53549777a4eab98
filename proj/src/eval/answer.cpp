#include "echo/eval/answer.hpp"

#include <algorithm>
#include <cctype>

#include "echo/error.hpp"

namespace echo {

std::string_view to_string(ParseStatus s) {
  switch (s) {
    case ParseStatus::kOk: return "ok";
    case ParseStatus::kFallbackMatched: return "fallback_matched";
    case ParseStatus::kParseFailure: return "parse_failure";
  }
  return "parse_failure";
}

ParseStatus parse_parse_status(std::string_view text) {
  if (text == "ok") return ParseStatus::kOk;
  if (text == "fallback_matched") return ParseStatus::kFallbackMatched;
  if (text == "parse_failure") return ParseStatus::kParseFailure;
  throw Error(ErrorCode::kParseError, "unknown parse status '" + std::string(text) + "'");
}

namespace {

bool is_word(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool contains_on_boundaries(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return false;
  for (std::size_t pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) {
    const std::size_t end = pos + needle.size();
    const bool left = pos == 0 || !is_word(haystack[pos - 1]) || !is_word(needle.front());
    const bool right = end == haystack.size() || !is_word(haystack[end]) || !is_word(needle.back());
    if (left && right) return true;
  }
  return false;
}

}  // namespace

ChoiceResult match_option_text(std::string_view reply, const std::vector<AnswerOption>& options) {
  const std::string text = lower(reply);
  const AnswerOption* hit = nullptr;
  for (const AnswerOption& o : options) {
    std::string needle = lower(o.text);
    while (!needle.empty() && std::isspace(static_cast<unsigned char>(needle.back()))) needle.pop_back();
    if (!contains_on_boundaries(text, needle)) continue;
    if (hit) return {};
    hit = &o;
  }
  if (!hit) return {};
  return {hit->letter, ParseStatus::kFallbackMatched};
}

// A token is a maximal run of word characters; it counts when it is exactly one
// option letter in upper case. Surrounding punctuation such as "(", ")", ".",
// ":" or "*" separates tokens, which covers "B.", "(B)", "B)" and "**B**".
ChoiceResult extract_choice(std::string_view reply, const std::vector<AnswerOption>& options) {
  std::size_t i = 0;
  while (i < reply.size()) {
    if (!is_word(reply[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < reply.size() && is_word(reply[j])) ++j;
    if (j - i == 1) {
      const char c = reply[i];
      for (const AnswerOption& o : options) {
        if (o.letter.size() == 1 && o.letter[0] == c) return {o.letter, ParseStatus::kOk};
      }
    }
    i = j;
  }
  return match_option_text(reply, options);
}

}  // namespace echo
