#include "dempref/session_store.hpp"

#include <algorithm>
#include <chrono>
#include <random>
#include <set>

#include <spdlog/spdlog.h>

#include "dempref/driver.hpp"
#include "dempref/random.hpp"
#include "dempref/serialization.hpp"

namespace dempref {

namespace {

constexpr int kRetryAfterMs = 500;

[[noreturn]] void unprocessable(const std::string& field, const std::string& message) {
  throw ServiceError(422, message, field);
}

int read_int(const json& body, const std::string& key, int fallback, int lo, int hi) {
  auto it = body.find(key);
  if (it == body.end()) return fallback;
  if (!it->is_number_integer()) unprocessable(key, key + " must be an integer");
  const auto value = it->get<std::int64_t>();
  if (value < lo || value > hi)
    unprocessable(key, key + " must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(value);
}

double read_nonnegative(const json& body, const std::string& key, double fallback) {
  auto it = body.find(key);
  if (it == body.end()) return fallback;
  if (!it->is_number()) unprocessable(key, key + " must be a number");
  const double value = it->get<double>();
  if (!std::isfinite(value) || value < 0.0) unprocessable(key, key + " must be a finite number >= 0");
  return value;
}

json belief_summary(const Belief& belief) {
  if (belief.samples.empty()) return json{{"sample_count", 0}};
  const Vector mean = belief.mean();
  const double norm = mean.norm();
  json direction = norm > 0.0 ? vector_to_json(mean / norm) : json(nullptr);
  return json{{"sample_count", belief.size()},
              {"mean", vector_to_json(mean)},
              {"mean_direction", direction},
              {"digest", belief_digest(belief)}};
}

}  // namespace

std::string to_string(SessionStatus status) {
  switch (status) {
    case SessionStatus::awaiting_demo:
      return "awaiting_demo";
    case SessionStatus::awaiting_response:
      return "awaiting_response";
    case SessionStatus::computing:
      return "computing";
    case SessionStatus::done:
      return "done";
  }
  return "done";
}

SessionStatus session_status_from_string(const std::string& text) {
  for (SessionStatus s : {SessionStatus::awaiting_demo, SessionStatus::awaiting_response, SessionStatus::computing,
                          SessionStatus::done})
    if (to_string(s) == text) return s;
  throw InvalidArgument("unknown session status '" + text + "'");
}

json ServiceError::body() const {
  json j{{"v", kSchemaVersion}, {"error", what()}};
  if (!field_.empty()) j["field"] = field_;
  return j;
}

DemPrefConfig parse_live_config(const json& body) {
  if (!body.is_object()) unprocessable("", "config must be a JSON object");
  static const std::set<std::string> known{"n_dem",     "n_queries",      "n_opt",   "use_ic", "update_mode",
                                           "beta_demo", "beta_response", "belief_samples", "sampler", "budget",
                                           "seed",      "pairwise_model", "v"};
  for (const auto& [key, value] : body.items())
    if (!known.count(key)) unprocessable(key, "unknown config field '" + key + "'");

  DemPrefConfig c;
  c.n_dem = read_int(body, "n_dem", c.n_dem, 0, 100);
  c.n_queries = read_int(body, "n_queries", c.n_queries, 0, 1000);
  c.n_opt = read_int(body, "n_opt", c.n_opt, 2, kMaxOptions);
  c.belief_samples = read_int(body, "belief_samples", c.belief_samples, 1, 1000000);
  c.beta_demo = read_nonnegative(body, "beta_demo", c.beta_demo);
  c.beta_response = read_nonnegative(body, "beta_response", c.beta_response);
  if (auto it = body.find("use_ic"); it != body.end()) {
    if (!it->is_boolean()) unprocessable("use_ic", "use_ic must be a boolean");
    c.use_ic = it->get<bool>();
  }
  if (c.use_ic && c.n_dem < 1) unprocessable("use_ic", "use_ic requires n_dem >= 1");
  if (auto it = body.find("update_mode"); it != body.end()) {
    if (!it->is_string() || it->get<std::string>() != "rank")
      unprocessable("update_mode", "live sessions only support update_mode \"rank\"");
  }
  if (auto it = body.find("pairwise_model"); it != body.end()) {
    if (!it->is_string() || (it->get<std::string>() != "exact" && it->get<std::string>() != "approx"))
      unprocessable("pairwise_model", "pairwise_model must be \"exact\" or \"approx\"");
    c.pairwise_model = it->get<std::string>() == "exact" ? ResponseModel::exact : ResponseModel::approx;
  }
  if (auto it = body.find("seed"); it != body.end()) {
    if (!it->is_number_integer() || (!it->is_number_unsigned() && it->get<std::int64_t>() < 0))
      unprocessable("seed", "seed must be a non-negative integer");
    c.seed = it->get<std::uint64_t>();
  }
  if (auto it = body.find("budget"); it != body.end()) {
    if (!it->is_object()) unprocessable("budget", "budget must be an object");
    for (const char* key : {"restarts", "iterations", "mc_samples", "threads"})
      if (it->contains(key) && !it->at(key).is_number_integer())
        unprocessable(std::string("budget.") + key, std::string("budget.") + key + " must be an integer");
    c.budget = it->get<OptBudget>();
    if (c.budget.restarts < 1) unprocessable("budget.restarts", "budget.restarts must be >= 1");
    if (c.budget.iterations < 0) unprocessable("budget.iterations", "budget.iterations must be >= 0");
    if (c.budget.mc_samples < 1) unprocessable("budget.mc_samples", "budget.mc_samples must be >= 1");
  }
  if (auto it = body.find("sampler"); it != body.end()) {
    if (!it->is_object()) unprocessable("sampler", "sampler must be an object");
    try {
      c.sampler = it->get<SamplerSettings>();
    } catch (const json::exception&) {
      unprocessable("sampler", "sampler fields must be numbers");
    }
    const SamplerSettings& s = c.sampler;
    if (s.burn_in < 0) unprocessable("sampler.burn_in", "sampler.burn_in must be >= 0");
    if (s.thin < 1) unprocessable("sampler.thin", "sampler.thin must be >= 1");
    if (!(s.initial_scale > 0.0)) unprocessable("sampler.initial_scale", "sampler.initial_scale must be > 0");
    if (s.adapt_window < 1) unprocessable("sampler.adapt_window", "sampler.adapt_window must be >= 1");
    if (!(s.target_acceptance > 0.0 && s.target_acceptance < 1.0))
      unprocessable("sampler.target_acceptance", "sampler.target_acceptance must be in (0, 1)");
  }
  c.update_mode = UpdateMode::rank;
  c.validate();
  return c;
}

json record_to_json(const SessionRecord& r) {
  json demos = json::array();
  for (const Trajectory& t : r.demos_received) demos.push_back(t);
  return json{{"v", kSchemaVersion},
              {"id", r.id},
              {"domain", r.domain},
              {"config", r.config},
              {"status", to_string(r.status)},
              {"state", r.state},
              {"demos_received", demos},
              {"pending", r.pending ? json(*r.pending) : json(nullptr)},
              {"last_error", r.last_error}};
}

SessionRecord record_from_json(const json& j) {
  if (j.value("v", 0) != kSchemaVersion) throw InvalidArgument("unsupported session file version");
  SessionRecord r;
  r.id = j.at("id").get<std::string>();
  r.domain = j.at("domain").get<std::string>();
  r.config = j.at("config").get<DemPrefConfig>();
  r.status = session_status_from_string(j.at("status").get<std::string>());
  r.state = j.at("state").get<SessionState>();
  for (const json& t : j.at("demos_received")) r.demos_received.push_back(t.get<Trajectory>());
  if (!j.at("pending").is_null()) r.pending = j.at("pending").get<PendingQuery>();
  r.last_error = j.value("last_error", std::string());
  return r;
}

SessionStore::SessionStore(SessionStoreOptions options) : options_(std::move(options)) {
  system_ = make_system(options_.domain);
  if (options_.data_dir.empty()) throw InvalidArgument("data_dir must be set");
  std::filesystem::create_directories(options_.data_dir);

  std::random_device device;
  id_salt_ = (static_cast<std::uint64_t>(device()) << 32) ^ device() ^
             static_cast<std::uint64_t>(std::chrono::system_clock::now().time_since_epoch().count());

  std::vector<std::string> resume;
  for (const auto& entry : std::filesystem::directory_iterator(options_.data_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    try {
      auto slot = std::make_shared<Slot>();
      slot->record = record_from_json(json::parse(read_file(entry.path())));
      if (slot->record.domain != options_.domain) {
        spdlog::warn("skipping session {} of domain {}", slot->record.id, slot->record.domain);
        continue;
      }
      if (slot->record.status == SessionStatus::computing) resume.push_back(slot->record.id);
      sessions_.emplace(slot->record.id, std::move(slot));
    } catch (const std::exception& e) {
      spdlog::warn("skipping unreadable session file {}: {}", entry.path().string(), e.what());
    }
  }
  if (options_.background)
    for (int i = 0; i < std::max(1, options_.workers); ++i) workers_.emplace_back([this] { worker_loop(); });
  for (const std::string& id : resume) schedule(id);
}

SessionStore::~SessionStore() {
  {
    std::lock_guard lock(queue_mutex_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  for (auto& t : workers_) t.join();
}

std::string SessionStore::new_id() {
  std::lock_guard lock(queue_mutex_);
  const std::uint64_t raw = mix64(id_salt_ + ++id_counter_);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(raw));
  return buf;
}

std::shared_ptr<SessionStore::Slot> SessionStore::find(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown session '" + id + "'");
  return it->second;
}

std::filesystem::path SessionStore::session_path(const std::string& id) const {
  return options_.data_dir / (id + ".json");
}

void SessionStore::persist(const SessionRecord& record) const {
  write_file_atomically(session_path(record.id), record_to_json(record).dump());
}

json SessionStore::domain_info() const {
  const SystemSpec& spec = system_->spec();
  json info{{"name", spec.name},
            {"state_dim", spec.state_dim},
            {"control_dim", spec.control_dim},
            {"feature_dim", spec.feature_dim},
            {"horizon", spec.horizon},
            {"steps_per_control", spec.steps_per_control},
            {"dt", spec.dt},
            {"control_lo", vector_to_json(spec.control_lo)},
            {"control_hi", vector_to_json(spec.control_hi)},
            {"start_state", vector_to_json(spec.start_state)},
            {"feature_names", system_->feature_names()}};
  if (const auto* driver = dynamic_cast<const DriverSystem*>(system_.get())) {
    const DriverParams& p = driver->params();
    info["driver"] = json{{"steering_gain", p.steering_gain},
                          {"friction", p.friction},
                          {"lane_centers", p.lane_centers},
                          {"lane_width", p.lane_width},
                          {"other_speed", p.other_speed}};
  }
  return info;
}

json SessionStore::create_session(const json& body) {
  DemPrefConfig config = parse_live_config(body.is_null() ? json::object() : body);
  auto slot = std::make_shared<Slot>();
  SessionRecord& r = slot->record;
  r.id = new_id();
  r.domain = options_.domain;
  r.config = config;
  if (config.n_dem == 0) {
    r.state = start_session({}, config, system_->spec().feature_dim);
    r.status = config.n_queries == 0 ? SessionStatus::done : SessionStatus::computing;
  }
  persist(r);
  const std::string id = r.id;
  const SessionStatus status = r.status;
  {
    std::unique_lock lock(sessions_mutex_);
    sessions_.emplace(id, slot);
  }
  spdlog::debug("session {} created (n_dem={}, n_queries={}, n_opt={}, ic={})", id, config.n_dem, config.n_queries,
               config.n_opt, config.use_ic);
  if (status == SessionStatus::computing) schedule(id);
  return json{{"v", kSchemaVersion}, {"id", id}, {"status", to_string(this->status(id))}};
}

json SessionStore::submit_demonstration(const std::string& id, const json& body) {
  auto slot = find(id);
  const SystemSpec& spec = system_->spec();
  if (!body.is_object() || !body.contains("controls")) unprocessable("controls", "body must contain \"controls\"");
  const json& controls = body.at("controls");
  if (!controls.is_array() || static_cast<int>(controls.size()) != spec.horizon)
    unprocessable("controls", "controls must be an array of " + std::to_string(spec.horizon) + " controls");
  std::vector<Vector> us;
  for (std::size_t t = 0; t < controls.size(); ++t) {
    const json& u = controls[t];
    const std::string field = "controls[" + std::to_string(t) + "]";
    if (!u.is_array() || static_cast<int>(u.size()) != spec.control_dim)
      unprocessable(field, field + " must hold " + std::to_string(spec.control_dim) + " numbers");
    Vector v(spec.control_dim);
    for (int i = 0; i < spec.control_dim; ++i) {
      if (!u[i].is_number()) unprocessable(field, field + " must hold numbers");
      v[i] = u[i].get<double>();
      if (!std::isfinite(v[i]) || v[i] < spec.control_lo[i] || v[i] > spec.control_hi[i])
        unprocessable(field + "[" + std::to_string(i) + "]", field + " is outside the control bounds");
    }
    us.push_back(std::move(v));
  }

  bool needs_compute = false;
  json reply;
  {
    std::lock_guard lock(slot->mutex);
    SessionRecord& r = slot->record;
    if (r.status != SessionStatus::awaiting_demo)
      throw ServiceError(409, "session is " + to_string(r.status) + ", not awaiting a demonstration");
    Trajectory traj;
    try {
      traj = rollout(*system_, us);
    } catch (const Error& e) {
      unprocessable("controls", e.what());
    }
    SessionRecord next = r;
    next.demos_received.push_back(traj);
    if (static_cast<int>(next.demos_received.size()) == next.config.n_dem) {
      next.state = start_session(next.demos_received, next.config, spec.feature_dim);
      next.status = next.config.n_queries == 0 ? SessionStatus::done : SessionStatus::computing;
      needs_compute = next.status == SessionStatus::computing;
    }
    persist(next);
    r = std::move(next);
    reply = json{{"v", kSchemaVersion},
                 {"id", id},
                 {"status", to_string(r.status)},
                 {"demos_received", r.demos_received.size()},
                 {"demos_required", r.config.n_dem},
                 {"trajectory", traj}};
  }
  if (needs_compute) schedule(id);
  return reply;
}

json SessionStore::get_current_query(const std::string& id) const {
  auto slot = find(id);
  std::lock_guard lock(slot->mutex);
  const SessionRecord& r = slot->record;
  json j{{"v", kSchemaVersion}, {"id", id}, {"status", to_string(r.status)}};
  switch (r.status) {
    case SessionStatus::awaiting_demo:
      j["demos_received"] = r.demos_received.size();
      j["demos_required"] = r.config.n_dem;
      j["domain"] = domain_info();
      break;
    case SessionStatus::computing:
      j["iteration"] = r.state.iteration;
      j["retry_after_ms"] = kRetryAfterMs;
      if (!r.last_error.empty()) j["error"] = r.last_error;
      break;
    case SessionStatus::awaiting_response:
      j["iteration"] = r.pending->iteration;
      j["n_queries"] = r.config.n_queries;
      j["query"] = r.pending->query;
      break;
    case SessionStatus::done:
      j["iteration"] = r.state.iteration;
      j["belief"] = belief_summary(r.state.belief);
      break;
  }
  return j;
}

json SessionStore::submit_ranking(const std::string& id, const json& body) {
  auto slot = find(id);
  if (!body.is_object()) unprocessable("", "body must be a JSON object");
  if (!body.contains("iteration") || !body.at("iteration").is_number_integer())
    unprocessable("iteration", "iteration must be an integer");
  if (!body.contains("permutation") || !body.at("permutation").is_array())
    unprocessable("permutation", "permutation must be an array");
  const int iteration = body.at("iteration").get<int>();

  bool needs_compute = false;
  json reply;
  {
    std::lock_guard lock(slot->mutex);
    SessionRecord& r = slot->record;
    if (r.status != SessionStatus::awaiting_response) {
      const bool stale = iteration < r.state.iteration;
      throw ServiceError(409, stale ? "iteration " + std::to_string(iteration) + " was already answered"
                                    : "session is " + to_string(r.status) + ", not awaiting a ranking");
    }
    if (iteration != r.pending->iteration)
      throw ServiceError(409, "ranking is for iteration " + std::to_string(iteration) + " but iteration " +
                                  std::to_string(r.pending->iteration) + " is pending");
    const int n = r.pending->query.size();
    std::vector<int> ranking;
    for (const json& v : body.at("permutation")) {
      if (!v.is_number_integer()) unprocessable("permutation", "permutation entries must be integers");
      ranking.push_back(v.get<int>() - 1);
    }
    if (static_cast<int>(ranking.size()) != n || !is_permutation_of_range(ranking, n))
      unprocessable("permutation", "permutation must be a bijection onto 1.." + std::to_string(n));

    SessionRecord next = r;
    next.state = apply_response(std::move(next.state), next.config, *next.pending,
                                RankingResponse{ranking, Responder::live});
    next.pending.reset();
    next.status = next.state.iteration >= next.config.n_queries ? SessionStatus::done : SessionStatus::computing;
    next.last_error.clear();
    needs_compute = next.status == SessionStatus::computing;
    persist(next);
    r = std::move(next);
    reply = json{{"v", kSchemaVersion}, {"id", id}, {"status", to_string(r.status)}, {"iteration", r.state.iteration}};
  }
  if (needs_compute) schedule(id);
  return reply;
}

json SessionStore::get_belief(const std::string& id) const {
  auto slot = find(id);
  std::lock_guard lock(slot->mutex);
  const SessionRecord& r = slot->record;
  return json{{"v", kSchemaVersion},
              {"id", id},
              {"status", to_string(r.status)},
              {"iteration", r.state.iteration},
              {"summary", belief_summary(r.state.belief)},
              {"belief", r.state.belief}};
}

SessionStatus SessionStore::status(const std::string& id) const {
  auto slot = find(id);
  std::lock_guard lock(slot->mutex);
  return slot->record.status;
}

SessionRecord SessionStore::snapshot(const std::string& id) const {
  auto slot = find(id);
  std::lock_guard lock(slot->mutex);
  return slot->record;
}

std::vector<std::string> SessionStore::session_ids() const {
  std::shared_lock lock(sessions_mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, slot] : sessions_) ids.push_back(id);
  return ids;
}

void SessionStore::wait_until_settled(const std::string& id) const {
  auto slot = find(id);
  std::unique_lock lock(slot->mutex);
  slot->settled.wait(lock, [&] {
    return slot->record.status != SessionStatus::computing || !slot->record.last_error.empty();
  });
}

void SessionStore::schedule(const std::string& id) {
  if (!options_.background) {
    compute(id);
    return;
  }
  {
    std::lock_guard lock(queue_mutex_);
    queue_.push_back(id);
  }
  queue_cv_.notify_one();
}

void SessionStore::worker_loop() {
  for (;;) {
    std::string id;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      id = std::move(queue_.front());
      queue_.pop_front();
    }
    compute(id);
  }
}

void SessionStore::compute(const std::string& id) {
  auto slot = find(id);
  SessionState state;
  DemPrefConfig config;
  {
    std::lock_guard lock(slot->mutex);
    if (slot->record.status != SessionStatus::computing) return;
    state = slot->record.state;
    config = slot->record.config;
  }
  // The query depends only on (state, config), so a restart mid-computation
  // reproduces the same query.
  std::optional<PendingQuery> pending;
  std::string error;
  try {
    pending = prepare_query(state, config, *system_);
  } catch (const std::exception& e) {
    error = e.what();
    spdlog::error("session {}: query generation failed: {}", id, error);
  }
  {
    std::lock_guard lock(slot->mutex);
    SessionRecord& r = slot->record;
    if (r.status != SessionStatus::computing || r.state.iteration != state.iteration) return;
    SessionRecord next = r;
    if (pending) {
      next.pending = std::move(pending);
      next.status = SessionStatus::awaiting_response;
      next.last_error.clear();
    } else {
      next.last_error = error;
    }
    persist(next);
    r = std::move(next);
  }
  slot->settled.notify_all();
}

}  // namespace dempref
