#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "intrinsic/io.hpp"

namespace intrinsic::service {

inline constexpr std::string_view kVersion = "0.1.0";

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8642;
  /// Value of Access-Control-Allow-Origin.
  std::string cors_origin = "*";
  int max_concurrent_solves = 4;
  /// Largest accepted image side, in pixels.
  int max_side = 4096;
  std::size_t max_body_bytes = std::size_t{512} << 20;
  /// Request worker threads; 0 picks the hardware concurrency.
  int threads = 0;

  /// Throws ParameterError on non-positive limits or a port outside 0..65535.
  void check() const;
};

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws ParameterError on characters outside the standard alphabet or bad
/// padding.
Bytes base64_decode(std::string_view text);

struct Response {
  int status = 200;
  std::string body;
  /// Wall-clock time of the computation, exported as a header so that bodies
  /// stay byte-identical across runs.
  double elapsed_ms = 0.0;
};

/// Transport-free request handling shared by the HTTP server and tests.
class Handler {
 public:
  explicit Handler(ServiceConfig config = {});

  Response health() const;
  Response canny(std::string_view body) const;
  Response solve(std::string_view body);
  Response evaluate(std::string_view body) const;

  const ServiceConfig& config() const noexcept { return config_; }

 private:
  ServiceConfig config_;
  std::unique_ptr<std::counting_semaphore<>> solve_slots_;
};

/// HTTP/1.1 front end over Handler.
class Server {
 public:
  explicit Server(ServiceConfig config = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds the configured host and port (port 0 picks a free one). Returns
  /// the bound port; throws IoError when binding fails.
  int bind();
  /// Serves until stop(); call after bind().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace intrinsic::service
