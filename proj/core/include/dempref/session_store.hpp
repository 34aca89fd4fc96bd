#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "dempref/dynamics.hpp"
#include "dempref/errors.hpp"
#include "dempref/learner.hpp"

namespace dempref {

// awaiting_demo -> (computing <-> awaiting_response)* -> done
enum class SessionStatus { awaiting_demo, awaiting_response, computing, done };

std::string to_string(SessionStatus status);
SessionStatus session_status_from_string(const std::string& text);

// Request-level failure carrying the HTTP status it maps to.
class ServiceError : public Error {
 public:
  ServiceError(int http_status, std::string message, std::string field = {})
      : Error(std::move(message)), http_status_(http_status), field_(std::move(field)) {}
  int http_status() const { return http_status_; }
  const std::string& field() const { return field_; }
  nlohmann::json body() const;

 private:
  int http_status_;
  std::string field_;
};

struct SessionStoreOptions {
  std::filesystem::path data_dir;
  std::string domain = "driver";
  // Compute queries on worker threads; otherwise inside the calling request.
  bool background = true;
  int workers = 1;
};

struct SessionRecord {
  std::string id;
  std::string domain;
  DemPrefConfig config;
  SessionStatus status = SessionStatus::awaiting_demo;
  SessionState state;
  std::vector<Trajectory> demos_received;
  std::optional<PendingQuery> pending;
  std::string last_error;
};

nlohmann::json record_to_json(const SessionRecord& record);
SessionRecord record_from_json(const nlohmann::json& j);

// Field-level validation of a live-session config; throws ServiceError 422
// naming the offending field. Live sessions always use ranking updates.
DemPrefConfig parse_live_config(const nlohmann::json& body);

// Live DemPref sessions, one JSON file per session under data_dir, written
// atomically. Mutations of one session are serialized; distinct sessions and
// reads proceed concurrently. Every payload carries "v": 1.
class SessionStore {
 public:
  explicit SessionStore(SessionStoreOptions options);
  ~SessionStore();
  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  // POST /sessions. Body is a (possibly partial) config; returns {"v", "id", "status"}.
  nlohmann::json create_session(const nlohmann::json& body);
  // POST /sessions/{id}/demonstrations with {"controls": [[s, a], ...]}.
  nlohmann::json submit_demonstration(const std::string& id, const nlohmann::json& body);
  // GET /sessions/{id}/query. Idempotent.
  nlohmann::json get_current_query(const std::string& id) const;
  // POST /sessions/{id}/ranking with {"iteration": i, "permutation": [...]},
  // permutation 1-based (rank -> option).
  nlohmann::json submit_ranking(const std::string& id, const nlohmann::json& body);
  // GET /sessions/{id}/belief.
  nlohmann::json get_belief(const std::string& id) const;

  SessionStatus status(const std::string& id) const;
  SessionRecord snapshot(const std::string& id) const;
  std::vector<std::string> session_ids() const;
  // Blocks until the session is no longer computing.
  void wait_until_settled(const std::string& id) const;
  std::filesystem::path session_path(const std::string& id) const;
  nlohmann::json domain_info() const;

 private:
  struct Slot {
    mutable std::mutex mutex;
    mutable std::condition_variable settled;
    SessionRecord record;
  };

  std::shared_ptr<Slot> find(const std::string& id) const;
  void persist(const SessionRecord& record) const;
  void schedule(const std::string& id);
  void compute(const std::string& id);
  void worker_loop();
  std::string new_id();

  SessionStoreOptions options_;
  std::shared_ptr<const System> system_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<std::string> queue_;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
  std::uint64_t id_counter_ = 0;
  std::uint64_t id_salt_ = 0;
};

}  // namespace dempref
