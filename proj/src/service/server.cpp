#include <string>
#include <thread>

#include "httplib.h"
#include "intrinsic/error.hpp"
#include "intrinsic/service.hpp"

namespace intrinsic::service {

struct Server::Impl {
  explicit Impl(ServiceConfig c) : handler(std::move(c)) {}
  Handler handler;
  httplib::Server http;
};

namespace {

void reply(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_header("Server-Timing", "compute;dur=" + std::to_string(r.elapsed_ms));
  res.set_content(r.body, "application/json");
}

}  // namespace

Server::Server(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
  const ServiceConfig& c = impl_->handler.config();
  httplib::Server& http = impl_->http;
  const int threads = c.threads > 0 ? c.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  http.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
  http.set_payload_max_length(c.max_body_bytes);
  http.set_default_headers({{"Access-Control-Allow-Origin", c.cors_origin},
                            {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                            {"Access-Control-Allow-Headers", "Content-Type"}});
  Handler& h = impl_->handler;
  http.Get("/health", [&h](const httplib::Request&, httplib::Response& res) { reply(res, h.health()); });
  http.Post("/canny", [&h](const httplib::Request& req, httplib::Response& res) { reply(res, h.canny(req.body)); });
  http.Post("/solve", [&h](const httplib::Request& req, httplib::Response& res) { reply(res, h.solve(req.body)); });
  http.Post("/evaluate",
            [&h](const httplib::Request& req, httplib::Response& res) { reply(res, h.evaluate(req.body)); });
  http.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const std::string code = res.status == 413 ? "body_too_large" : res.status == 404 ? "not_found" : "http_error";
    res.set_content("{\"error\":\"" + code + "\",\"message\":\"HTTP " + std::to_string(res.status) + "\"}",
                    "application/json");
  });
}

Server::~Server() { stop(); }

int Server::bind() {
  const ServiceConfig& c = impl_->handler.config();
  if (c.port == 0) {
    const int port = impl_->http.bind_to_any_port(c.host);
    if (port < 0) throw IoError("cannot bind " + c.host);
    return port;
  }
  if (!impl_->http.bind_to_port(c.host, c.port)) {
    throw IoError("cannot bind " + c.host + ":" + std::to_string(c.port));
  }
  return c.port;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_) impl_->http.stop();
}

}  // namespace intrinsic::service
