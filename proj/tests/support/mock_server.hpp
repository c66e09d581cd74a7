#pragma once

#include <functional>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace triples::testing {

/// In-process HTTP server on a free loopback port, for exercising the remote
/// backend without a network.
class MockServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit MockServer(const std::string& path, Handler handler) {
    server_.Post(path, std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

/// Body of a minimal chat-completions reply.
inline std::string chat_reply(const std::string& content) {
  return R"({"choices":[{"index":0,"message":{"role":"assistant","content":)" +
         nlohmann::json(content).dump() + "}}]}";
}

}  // namespace triples::testing
