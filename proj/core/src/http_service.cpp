#include "dempref/http_service.hpp"

#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "dempref/serialization.hpp"

namespace dempref {

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, const std::string& field = {}) {
  send_json(res, status, ServiceError(status, message, field).body());
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  return json::parse(req.body);
}

// Maps store exceptions onto status codes.
template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const ServiceError& e) {
      send_json(res, e.http_status(), e.body());
    } catch (const json::parse_error& e) {
      send_error(res, 400, std::string("malformed JSON: ") + e.what());
    } catch (const InvalidArgument& e) {
      send_error(res, 422, e.what());
    } catch (const std::exception& e) {
      spdlog::error("{} {}: {}", req.method, req.path, e.what());
      send_error(res, 500, e.what());
    }
  };
}

}  // namespace

struct HttpService::Impl {
  SessionStore& store;
  HttpServiceOptions options;
  httplib::Server server;
  std::thread thread;
  int port = -1;

  Impl(SessionStore& s, HttpServiceOptions o) : store(s), options(std::move(o)) {}
};

HttpService::HttpService(SessionStore& store, HttpServiceOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {
  auto& server = impl_->server;
  SessionStore& s = store;

  server.Post("/sessions", guarded([&s](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 201, s.create_session(parse_body(req)));
              }));
  server.Post(R"(/sessions/([0-9a-f]+)/demonstrations)",
              guarded([&s](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, s.submit_demonstration(req.matches[1], parse_body(req)));
              }));
  server.Get(R"(/sessions/([0-9a-f]+)/query)", guarded([&s](const httplib::Request& req, httplib::Response& res) {
               json body = s.get_current_query(req.matches[1]);
               if (body.at("status") == "computing") {
                 const int ms = body.at("retry_after_ms").get<int>();
                 res.set_header("Retry-After", std::to_string((ms + 999) / 1000));
                 send_json(res, 202, body);
               } else {
                 send_json(res, 200, body);
               }
             }));
  server.Post(R"(/sessions/([0-9a-f]+)/ranking)", guarded([&s](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, s.submit_ranking(req.matches[1], parse_body(req)));
              }));
  server.Get(R"(/sessions/([0-9a-f]+)/belief)", guarded([&s](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, s.get_belief(req.matches[1]));
             }));
  server.Get("/domain", guarded([&s](const httplib::Request&, httplib::Response& res) {
               send_json(res, 200, json{{"v", kSchemaVersion}, {"domain", s.domain_info()}});
             }));
  if (!impl_->options.static_dir.empty() && !server.set_mount_point("/", impl_->options.static_dir.string()))
    throw InvalidArgument("static directory " + impl_->options.static_dir.string() + " does not exist");
}

HttpService::~HttpService() { stop(); }

int HttpService::bind() {
  if (impl_->port >= 0) return impl_->port;
  const auto& o = impl_->options;
  impl_->port = o.port == 0 ? impl_->server.bind_to_any_port(o.host) : (impl_->server.bind_to_port(o.host, o.port) ? o.port : -1);
  if (impl_->port < 0) throw Error("cannot bind " + o.host + ":" + std::to_string(o.port));
  return impl_->port;
}

void HttpService::serve() {
  bind();
  spdlog::info("listening on {}:{}", impl_->options.host, impl_->port);
  impl_->server.listen_after_bind();
}

void HttpService::start() {
  bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void HttpService::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int HttpService::port() const { return impl_->port; }

}  // namespace dempref
