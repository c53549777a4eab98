#include <fstream>
#include <sstream>

#include "json.hpp"

#include "echo/gateway/chat.hpp"
#include "echo/util/codec.hpp"
#include "http_transport.hpp"

namespace echo {

namespace {

std::string read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingImage, path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool is_remote(std::string_view uri) { return uri.starts_with("http://") || uri.starts_with("https://"); }

class SemaphoreSlot {
 public:
  explicit SemaphoreSlot(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
  ~SemaphoreSlot() { s_.release(); }
  SemaphoreSlot(const SemaphoreSlot&) = delete;
  SemaphoreSlot& operator=(const SemaphoreSlot&) = delete;

 private:
  std::counting_semaphore<>& s_;
};

}  // namespace

HttpChatBackend::HttpChatBackend(HttpChatConfig config) : config_(std::move(config)) {
  if (config_.pool_size == 0) throw Error(ErrorCode::kConfigError, "gateway pool size must be positive");
  if (config_.retries < 0) throw Error(ErrorCode::kConfigError, "gateway retries must be non-negative");
  parse_endpoint(config_.endpoint);
  in_flight_ = std::make_unique<std::counting_semaphore<>>(static_cast<std::ptrdiff_t>(config_.pool_size));
}

std::string HttpChatBackend::build_body(const ChatRequest& request) const {
  using nlohmann::ordered_json;
  ordered_json content = ordered_json::array();
  for (const std::string& block : request.user_blocks) content.push_back({{"type", "text"}, {"text", block}});
  for (const ImagePart& image : request.images) {
    std::string url;
    if (image.bytes.empty() && is_remote(image.uri)) {
      url = image.uri;
    } else {
      const std::string bytes = image.bytes.empty() ? read_image(image.uri) : image.bytes;
      const std::string mime = image.mime_type.empty() ? mime_type_for(image.uri) : image.mime_type;
      url = "data:" + mime + ";base64," + util::base64_encode(bytes);
    }
    content.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
  }

  ordered_json messages = ordered_json::array();
  if (!request.system_text.empty()) messages.push_back({{"role", "system"}, {"content", request.system_text}});
  messages.push_back({{"role", "user"}, {"content", std::move(content)}});

  ordered_json body;
  body["model"] = config_.model;
  body["messages"] = std::move(messages);
  body["max_tokens"] = request.max_tokens;
  body["temperature"] = request.temperature;
  return body.dump();
}

std::string HttpChatBackend::chat(const ChatRequest& request) {
  request.validate();
  const std::string body = build_body(request);
  const Endpoint endpoint = parse_endpoint(config_.endpoint);

  std::string reply;
  {
    SemaphoreSlot slot(*in_flight_);
    reply = detail::post_json(endpoint, body,
                              {config_.api_key, config_.timeout, config_.retries, config_.backoff});
  }

  using nlohmann::json;
  try {
    const json doc = json::parse(reply);
    const json& content = doc.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    // Some servers answer with a list of typed parts.
    if (content.is_array()) {
      std::string text;
      for (const json& part : content) {
        if (part.value("type", std::string{}) == "text") text += part.at("text").get<std::string>();
      }
      return text;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse, e.what());
  }
  throw Error(ErrorCode::kMalformedResponse, "choices[0].message.content is neither text nor parts");
}

}  // namespace echo
