#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <regex>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "echo/error.hpp"

namespace echo {

struct ImagePart {
  std::string mime_type;
  std::string uri;    // file path or http(s) URL
  std::string bytes;  // inline payload; when empty the uri is resolved at send time
};

struct ChatRequest {
  std::string system_text;
  std::vector<std::string> user_blocks;
  std::vector<ImagePart> images;
  std::size_t max_tokens = 512;
  double temperature = 0.0;

  // Canonical text form: system text, then user blocks, then image references.
  // This is what mock rules match against.
  std::string serialize() const;
  void validate() const;  // throws kInvalidArgument
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  // Throws echo::Error with kGatewayUnavailable, kGatewayTimeout or kMalformedResponse.
  virtual std::string chat(const ChatRequest& request) = 0;
};

// Scripted replies for offline runs. Rules are tried in order against
// ChatRequest::serialize(); the first hit answers.
struct MockScript {
  struct Rule {
    enum class Kind { kSubstring, kRegex };
    Kind kind = Kind::kSubstring;
    std::string pattern;
    std::string reply;
    // When set the rule raises this gateway error instead of replying.
    std::optional<ErrorCode> fail_with;
  };

  std::vector<Rule> rules;
  std::string default_reply;

  // {"rules": [{"contains"|"regex": "...", "reply": "...", "error": "unavailable"|"timeout"|"malformed"}],
  //  "default_reply": "..."}
  static MockScript parse(std::string_view json_text);
  static MockScript load(const std::string& path);
};

class MockChatBackend final : public ChatBackend {
 public:
  explicit MockChatBackend(MockScript script);
  std::string chat(const ChatRequest& request) override;

  const MockScript& script() const { return script_; }

 private:
  MockScript script_;
  std::vector<std::optional<std::regex>> compiled_;
};

struct HttpChatConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8000/v1/chat/completions
  std::string model;
  std::string api_key;   // sent as a bearer token when non-empty
  std::chrono::milliseconds timeout{30000};
  int retries = 2;
  std::chrono::milliseconds backoff{200};
  std::size_t pool_size = 4;
};

// OpenAI-style chat-completions client. Images travel as base64 data URLs in
// image_url content parts (http(s) URIs are passed through). Transport errors,
// 429 and 5xx are retried with exponential backoff.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpChatConfig config);
  std::string chat(const ChatRequest& request) override;

  // The JSON body that chat() would POST.
  std::string build_body(const ChatRequest& request) const;

 private:
  HttpChatConfig config_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

// Parsed http(s)://host[:port]/path.
struct Endpoint {
  std::string scheme;
  std::string host;
  int port = 80;
  std::string path;

  std::string origin() const;
};
Endpoint parse_endpoint(std::string_view url);  // throws kConfigError

std::string mime_type_for(std::string_view path);

}  // namespace echo
