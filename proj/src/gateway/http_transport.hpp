#pragma once

#include <chrono>
#include <string>

#include "echo/gateway/chat.hpp"

namespace echo::detail {

struct PostOptions {
  std::string api_key;
  std::chrono::milliseconds timeout{30000};
  int retries = 2;
  std::chrono::milliseconds backoff{200};
};

// POSTs a JSON body and returns the 2xx response body. Connection failures,
// 429 and 5xx are retried up to options.retries extra times, doubling the wait
// each round. Throws kGatewayTimeout or kGatewayUnavailable once retries run out.
std::string post_json(const Endpoint& endpoint, const std::string& body, const PostOptions& options);

}  // namespace echo::detail
