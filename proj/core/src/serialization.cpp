#include "dempref/serialization.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "dempref/errors.hpp"

namespace dempref {

namespace {

std::vector<Vector> vectors_from_json(const json& j) {
  std::vector<Vector> out;
  out.reserve(j.size());
  for (const json& item : j) out.push_back(vector_from_json(item));
  return out;
}

json vectors_to_json(const std::vector<Vector>& vs) {
  json arr = json::array();
  for (const Vector& v : vs) arr.push_back(vector_to_json(v));
  return arr;
}

template <typename T>
void read_optional(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->template get<T>();
}

const char* to_string(ResponseKind k) {
  switch (k) {
    case ResponseKind::rank:
      return "rank";
    case ResponseKind::pick_best:
      return "pick_best";
    case ResponseKind::pairwise:
      return "pairwise";
  }
  return "rank";
}

ResponseKind response_kind_from_string(const std::string& s) {
  if (s == "rank") return ResponseKind::rank;
  if (s == "pick_best") return ResponseKind::pick_best;
  if (s == "pairwise") return ResponseKind::pairwise;
  throw InvalidArgument("unknown response kind '" + s + "'");
}

const char* to_string(ResponseModel m) { return m == ResponseModel::exact ? "exact" : "approx"; }

ResponseModel response_model_from_string(const std::string& s) {
  if (s == "exact") return ResponseModel::exact;
  if (s == "approx") return ResponseModel::approx;
  throw InvalidArgument("unknown response model '" + s + "'");
}

}  // namespace

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw InvalidArgument("expected a numeric array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InvalidArgument("expected a numeric array");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

std::string to_string(UpdateMode mode) {
  switch (mode) {
    case UpdateMode::rank:
      return "rank";
    case UpdateMode::pick_best:
      return "pick_best";
    case UpdateMode::pairwise:
      return "pairwise";
  }
  return "rank";
}

UpdateMode update_mode_from_string(const std::string& text) {
  if (text == "rank") return UpdateMode::rank;
  if (text == "pick_best") return UpdateMode::pick_best;
  if (text == "pairwise") return UpdateMode::pairwise;
  throw InvalidArgument("unknown update mode '" + text + "' (expected rank, pick_best or pairwise)");
}

void to_json(json& j, const Trajectory& t) {
  j = json{{"controls", vectors_to_json(t.controls)}, {"states", vectors_to_json(t.states)},
           {"phi", vector_to_json(t.phi)}};
}

void from_json(const json& j, Trajectory& t) {
  t.controls = vectors_from_json(j.at("controls"));
  t.states = vectors_from_json(j.at("states"));
  t.phi = vector_from_json(j.at("phi"));
}

void to_json(json& j, const Query& q) {
  j = json{{"trajectories", q.trajectories},
           {"stored_index", q.stored_index ? json(*q.stored_index) : json(nullptr)},
           {"objective", q.objective_value}};
}

void from_json(const json& j, Query& q) {
  q.trajectories = j.at("trajectories").get<std::vector<Trajectory>>();
  const json& stored = j.at("stored_index");
  q.stored_index = stored.is_null() ? std::nullopt : std::optional<int>(stored.get<int>());
  q.objective_value = j.at("objective").get<double>();
}

void to_json(json& j, const Response& r) {
  j = json{{"phis", vectors_to_json(r.phis)}, {"ranking", r.ranking}, {"kind", to_string(r.kind)}};
}

void from_json(const json& j, Response& r) {
  r.phis = vectors_from_json(j.at("phis"));
  r.ranking = j.at("ranking").get<std::vector<int>>();
  r.kind = response_kind_from_string(j.at("kind").get<std::string>());
}

void to_json(json& j, const Evidence& e) {
  j = json{{"demonstrations", vectors_to_json(e.demonstrations)},
           {"responses", e.responses},
           {"beta_demo", e.beta_demo},
           {"beta_response", e.beta_response},
           {"pairwise_model", to_string(e.pairwise_model)}};
}

void from_json(const json& j, Evidence& e) {
  e.demonstrations = vectors_from_json(j.at("demonstrations"));
  e.responses = j.at("responses").get<std::vector<Response>>();
  e.beta_demo = j.at("beta_demo").get<double>();
  e.beta_response = j.at("beta_response").get<double>();
  e.pairwise_model = response_model_from_string(j.at("pairwise_model").get<std::string>());
}

void to_json(json& j, const SamplerSettings& s) {
  j = json{{"burn_in", s.burn_in},
           {"thin", s.thin},
           {"target_acceptance", s.target_acceptance},
           {"initial_scale", s.initial_scale},
           {"adapt_window", s.adapt_window},
           {"min_acceptance", s.min_acceptance}};
}

void from_json(const json& j, SamplerSettings& s) {
  read_optional(j, "burn_in", s.burn_in);
  read_optional(j, "thin", s.thin);
  read_optional(j, "target_acceptance", s.target_acceptance);
  read_optional(j, "initial_scale", s.initial_scale);
  read_optional(j, "adapt_window", s.adapt_window);
  read_optional(j, "min_acceptance", s.min_acceptance);
}

void to_json(json& j, const Belief& b) {
  json chains = json::array();
  for (const ChainProvenance& c : b.chains)
    chains.push_back({{"seed", c.seed},
                      {"first", c.first},
                      {"count", c.count},
                      {"acceptance_rate", c.acceptance_rate},
                      {"proposal_scale", c.proposal_scale}});
  j = json{{"samples", vectors_to_json(b.samples)},
           {"seed", b.seed},
           {"evidence_digest", b.evidence_digest},
           {"sampler", b.settings},
           {"chains", chains}};
}

void from_json(const json& j, Belief& b) {
  b.samples = vectors_from_json(j.at("samples"));
  b.seed = j.at("seed").get<std::uint64_t>();
  b.evidence_digest = j.at("evidence_digest").get<std::string>();
  b.settings = {};
  if (j.contains("sampler")) b.settings = j.at("sampler").get<SamplerSettings>();
  b.chains.clear();
  if (j.contains("chains"))
    for (const json& c : j.at("chains"))
      b.chains.push_back({c.at("seed").get<std::uint64_t>(), c.at("first").get<int>(), c.at("count").get<int>(),
                          c.at("acceptance_rate").get<double>(), c.at("proposal_scale").get<double>()});
}

void to_json(json& j, const OptBudget& b) {
  j = json{{"restarts", b.restarts}, {"iterations", b.iterations}, {"mc_samples", b.mc_samples}, {"seed", b.seed}};
}

void from_json(const json& j, OptBudget& b) {
  read_optional(j, "restarts", b.restarts);
  read_optional(j, "iterations", b.iterations);
  read_optional(j, "mc_samples", b.mc_samples);
  read_optional(j, "seed", b.seed);
}

void to_json(json& j, const RankingResponse& r) {
  j = json{{"ranking", r.ranking}, {"responder", r.responder == Responder::live ? "live" : "simulated"}};
}

void from_json(const json& j, RankingResponse& r) {
  r.ranking = j.at("ranking").get<std::vector<int>>();
  r.responder = j.at("responder").get<std::string>() == "live" ? Responder::live : Responder::simulated;
}

void to_json(json& j, const DemPrefConfig& c) {
  j = json{{"n_dem", c.n_dem},
           {"n_queries", c.n_queries},
           {"n_opt", c.n_opt},
           {"use_ic", c.use_ic},
           {"update_mode", to_string(c.update_mode)},
           {"beta_demo", c.beta_demo},
           {"beta_response", c.beta_response},
           {"pairwise_model", to_string(c.pairwise_model)},
           {"belief_samples", c.belief_samples},
           {"sampler", c.sampler},
           {"budget", c.budget},
           {"seed", c.seed}};
}

void from_json(const json& j, DemPrefConfig& c) {
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  read_optional(j, "n_dem", c.n_dem);
  read_optional(j, "n_queries", c.n_queries);
  read_optional(j, "n_opt", c.n_opt);
  read_optional(j, "use_ic", c.use_ic);
  if (j.contains("update_mode")) c.update_mode = update_mode_from_string(j.at("update_mode").get<std::string>());
  read_optional(j, "beta_demo", c.beta_demo);
  read_optional(j, "beta_response", c.beta_response);
  if (j.contains("pairwise_model"))
    c.pairwise_model = response_model_from_string(j.at("pairwise_model").get<std::string>());
  read_optional(j, "belief_samples", c.belief_samples);
  if (j.contains("sampler")) c.sampler = j.at("sampler").get<SamplerSettings>();
  if (j.contains("budget")) c.budget = j.at("budget").get<OptBudget>();
  read_optional(j, "seed", c.seed);
}

void to_json(json& j, const TraceRecord& r) {
  j = json{{"iteration", r.iteration},
           {"belief_digest", r.belief_digest},
           {"query", r.query},
           {"response", r.response},
           {"buffer_slot", r.buffer_slot ? json(*r.buffer_slot) : json(nullptr)},
           {"metric", r.metric ? json(*r.metric) : json(nullptr)}};
}

void from_json(const json& j, TraceRecord& r) {
  r.iteration = j.at("iteration").get<int>();
  r.belief_digest = j.at("belief_digest").get<std::string>();
  r.query = j.at("query").get<Query>();
  r.response = j.at("response").get<RankingResponse>();
  const json& slot = j.at("buffer_slot");
  r.buffer_slot = slot.is_null() ? std::nullopt : std::optional<int>(slot.get<int>());
  const json& metric = j.at("metric");
  r.metric = metric.is_null() ? std::nullopt : std::optional<double>(metric.get<double>());
}

void to_json(json& j, const PendingQuery& p) {
  j = json{{"iteration", p.iteration},
           {"query", p.query},
           {"buffer_slot", p.buffer_slot ? json(*p.buffer_slot) : json(nullptr)},
           {"belief_digest", p.belief_digest}};
}

void from_json(const json& j, PendingQuery& p) {
  p.iteration = j.at("iteration").get<int>();
  p.query = j.at("query").get<Query>();
  const json& slot = j.at("buffer_slot");
  p.buffer_slot = slot.is_null() ? std::nullopt : std::optional<int>(slot.get<int>());
  p.belief_digest = j.at("belief_digest").get<std::string>();
}

void to_json(json& j, const SessionState& s) {
  j = json{{"evidence", s.evidence},
           {"belief", s.belief},
           {"demonstrations", s.demonstrations},
           {"buffer", s.buffer},
           {"trace", s.trace},
           {"iteration", s.iteration},
           {"initial_metric", s.initial_metric ? json(*s.initial_metric) : json(nullptr)}};
}

void from_json(const json& j, SessionState& s) {
  s.evidence = j.at("evidence").get<Evidence>();
  s.belief = j.at("belief").get<Belief>();
  s.demonstrations = j.at("demonstrations").get<std::vector<Trajectory>>();
  s.buffer = j.at("buffer").get<std::vector<Trajectory>>();
  s.trace = j.at("trace").get<std::vector<TraceRecord>>();
  s.iteration = j.at("iteration").get<int>();
  const json& m = j.at("initial_metric");
  s.initial_metric = m.is_null() ? std::nullopt : std::optional<double>(m.get<double>());
}

void write_file_atomically(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dempref
