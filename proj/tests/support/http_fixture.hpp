#pragma once

#include <atomic>
#include <functional>
#include <string>
#include <thread>

#include <httplib.h>

namespace genattr::testing {

// In-process HTTP server answering POST /generate on an ephemeral port.
class ServerFixture {
 public:
  explicit ServerFixture(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/generate", [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      last_body_ = req.body;
      handler(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~ServerFixture() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int hits() const { return hits_.load(); }
  std::string last_body() const { return last_body_; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> hits_{0};
  std::string last_body_;
};

}  // namespace genattr::testing
