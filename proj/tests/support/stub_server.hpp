#pragma once

// Local HTTP server for transport tests. Listens on an ephemeral loopback port
// and stops when destroyed.

#include <string>
#include <thread>

#include "httplib.h"

namespace echo::testing {

class StubServer {
 public:
  StubServer() : port_(server_.bind_to_any_port("127.0.0.1")) {}

  ~StubServer() { stop(); }

  httplib::Server& server() { return server_; }

  void start() {
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

 private:
  httplib::Server server_;
  int port_;
  std::thread thread_;
};

}  // namespace echo::testing
