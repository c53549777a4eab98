#include "http_transport.hpp"

#include <thread>

#include "httplib.h"

namespace echo::detail {

namespace {

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

std::string post_json(const Endpoint& endpoint, const std::string& body, const PostOptions& options) {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (endpoint.scheme == "https") throw Error(ErrorCode::kConfigError, "this build has no TLS support for https endpoints");
#endif
  httplib::Client client(endpoint.origin());
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(options.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(options.timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());
  httplib::Headers headers;
  if (!options.api_key.empty()) headers.emplace("Authorization", "Bearer " + options.api_key);

  std::chrono::milliseconds wait = options.backoff;
  ErrorCode last_code = ErrorCode::kGatewayUnavailable;
  std::string last_message;
  for (int attempt = 0; attempt <= options.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(wait);
      wait *= 2;
    }
    auto result = client.Post(endpoint.path, headers, body, "application/json");
    if (!result) {
      const auto err = result.error();
      last_code = err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout
                      ? ErrorCode::kGatewayTimeout
                      : ErrorCode::kGatewayUnavailable;
      last_message = endpoint.origin() + endpoint.path + ": " + httplib::to_string(err);
      continue;
    }
    if (result->status >= 200 && result->status < 300) return result->body;
    last_code = ErrorCode::kGatewayUnavailable;
    last_message = endpoint.origin() + endpoint.path + ": HTTP " + std::to_string(result->status);
    if (!transient_status(result->status)) break;
  }
  throw Error(last_code, last_message);
}

}  // namespace echo::detail
