#include "echo/gateway/chat.hpp"

#include <cctype>
#include <cmath>

#include "json.hpp"

#include "echo/util/binary_io.hpp"

namespace echo {

std::string ChatRequest::serialize() const {
  std::string out;
  out += "[system]\n";
  out += system_text;
  out += '\n';
  for (const std::string& block : user_blocks) {
    out += "[user]\n";
    out += block;
    out += '\n';
  }
  for (const ImagePart& image : images) {
    out += "[image] ";
    out += image.mime_type;
    out += ' ';
    out += image.uri;
    out += '\n';
  }
  return out;
}

void ChatRequest::validate() const {
  if (user_blocks.empty()) throw Error(ErrorCode::kInvalidArgument, "chat request needs at least one user block");
  if (max_tokens == 0) throw Error(ErrorCode::kInvalidArgument, "max_tokens must be positive");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be a non-negative real");
  }
}

namespace {

ErrorCode parse_gateway_error(const std::string& name) {
  if (name == "unavailable" || name == "GatewayUnavailable") return ErrorCode::kGatewayUnavailable;
  if (name == "timeout" || name == "GatewayTimeout") return ErrorCode::kGatewayTimeout;
  if (name == "malformed" || name == "MalformedResponse") return ErrorCode::kMalformedResponse;
  throw Error(ErrorCode::kParseError, "unknown mock error '" + name + "'");
}

}  // namespace

MockScript MockScript::parse(std::string_view json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("mock script: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kParseError, "mock script must be a JSON object");

  MockScript script;
  try {
    script.default_reply = doc.value("default_reply", std::string{});
    if (auto rules = doc.find("rules"); rules != doc.end()) {
      if (!rules->is_array()) throw Error(ErrorCode::kParseError, "mock script rules must be an array");
      for (std::size_t i = 0; i < rules->size(); ++i) {
        const json& r = (*rules)[i];
        Rule rule;
        if (r.contains("contains")) {
          rule.pattern = r.at("contains").get<std::string>();
        } else if (r.contains("regex")) {
          rule.kind = Rule::Kind::kRegex;
          rule.pattern = r.at("regex").get<std::string>();
        } else {
          throw Error(ErrorCode::kParseError, "mock rule " + std::to_string(i + 1) + " needs 'contains' or 'regex'");
        }
        rule.reply = r.value("reply", std::string{});
        if (r.contains("error")) rule.fail_with = parse_gateway_error(r.at("error").get<std::string>());
        script.rules.push_back(std::move(rule));
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("mock script: ") + e.what());
  }
  return script;
}

MockScript MockScript::load(const std::string& path) {
  const auto bytes = util::read_file(path);
  return parse(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

MockChatBackend::MockChatBackend(MockScript script) : script_(std::move(script)) {
  compiled_.reserve(script_.rules.size());
  for (const auto& rule : script_.rules) {
    if (rule.kind == MockScript::Rule::Kind::kRegex) {
      try {
        compiled_.emplace_back(std::regex(rule.pattern, std::regex::ECMAScript));
      } catch (const std::regex_error& e) {
        throw Error(ErrorCode::kParseError, "mock regex '" + rule.pattern + "': " + e.what());
      }
    } else {
      compiled_.emplace_back(std::nullopt);
    }
  }
}

// Pure function of the request: the script and compiled patterns are never
// mutated after construction, so concurrent calls need no locking.
std::string MockChatBackend::chat(const ChatRequest& request) {
  request.validate();
  const std::string text = request.serialize();
  for (std::size_t i = 0; i < script_.rules.size(); ++i) {
    const auto& rule = script_.rules[i];
    const bool hit = compiled_[i] ? std::regex_search(text, *compiled_[i]) : text.find(rule.pattern) != std::string::npos;
    if (!hit) continue;
    if (rule.fail_with) throw Error(*rule.fail_with, "scripted failure for rule " + std::to_string(i + 1));
    return rule.reply;
  }
  return script_.default_reply;
}

std::string mime_type_for(std::string_view path) {
  auto ends_with = [&](std::string_view suffix) {
    if (path.size() < suffix.size()) return false;
    for (std::size_t i = 0; i < suffix.size(); ++i) {
      if (std::tolower(static_cast<unsigned char>(path[path.size() - suffix.size() + i])) != suffix[i]) return false;
    }
    return true;
  };
  if (ends_with(".png")) return "image/png";
  if (ends_with(".jpg") || ends_with(".jpeg")) return "image/jpeg";
  if (ends_with(".bmp")) return "image/bmp";
  if (ends_with(".webp")) return "image/webp";
  if (ends_with(".tif") || ends_with(".tiff")) return "image/tiff";
  return "application/octet-stream";
}

Endpoint parse_endpoint(std::string_view url) {
  Endpoint out;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw Error(ErrorCode::kConfigError, "endpoint '" + std::string(url) + "' has no scheme");
  out.scheme = std::string(url.substr(0, scheme_end));
  if (out.scheme != "http" && out.scheme != "https") {
    throw Error(ErrorCode::kConfigError, "endpoint scheme must be http or https: '" + std::string(url) + "'");
  }
  std::string_view rest = url.substr(scheme_end + 3);
  const auto slash = rest.find('/');
  std::string_view authority = rest.substr(0, slash);
  out.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
  out.port = out.scheme == "https" ? 443 : 80;
  if (const auto colon = authority.rfind(':'); colon != std::string_view::npos) {
    try {
      out.port = std::stoi(std::string(authority.substr(colon + 1)));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfigError, "bad port in endpoint '" + std::string(url) + "'");
    }
    authority = authority.substr(0, colon);
  }
  if (authority.empty()) throw Error(ErrorCode::kConfigError, "endpoint '" + std::string(url) + "' has no host");
  out.host = std::string(authority);
  return out;
}

std::string Endpoint::origin() const { return scheme + "://" + host + ":" + std::to_string(port); }

}  // namespace echo
