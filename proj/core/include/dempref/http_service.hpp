#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "dempref/session_store.hpp"

namespace dempref {

struct HttpServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds an ephemeral port
  // Served under / when set (the browser front end).
  std::filesystem::path static_dir;
};

// JSON over HTTP in front of a SessionStore:
//   POST /sessions                       -> 201 {"v", "id", "status"}
//   POST /sessions/{id}/demonstrations   -> 200 | 404 | 409 | 422
//   GET  /sessions/{id}/query            -> 200, or 202 with Retry-After while computing
//   POST /sessions/{id}/ranking          -> 200 | 404 | 409 | 422
//   GET  /sessions/{id}/belief           -> 200 | 404
// Errors carry {"v", "error", "field"?}; malformed JSON bodies get 400.
class HttpService {
 public:
  HttpService(SessionStore& store, HttpServiceOptions options);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  // Binds the socket and returns the bound port.
  int bind();
  // Serves on the calling thread until stop(); binds first if needed.
  void serve();
  // serve() on a background thread.
  void start();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dempref
