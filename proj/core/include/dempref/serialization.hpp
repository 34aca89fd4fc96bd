#pragma once

// JSON wire formats shared by the session service, the session files and the
// command line tool. Trajectories use
//   {"controls": [[s, a], ...], "states": [[x, y, theta, v, xo, yo], ...], "phi": [...]}
// and queries
//   {"trajectories": [...], "stored_index": int | null, "objective": float}.

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "dempref/belief.hpp"
#include "dempref/dynamics.hpp"
#include "dempref/learner.hpp"
#include "dempref/oracle.hpp"
#include "dempref/querygen.hpp"

namespace dempref {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j);

void to_json(json& j, const Trajectory& t);
void from_json(const json& j, Trajectory& t);

void to_json(json& j, const Query& q);
void from_json(const json& j, Query& q);

void to_json(json& j, const Response& r);
void from_json(const json& j, Response& r);

void to_json(json& j, const Evidence& e);
void from_json(const json& j, Evidence& e);

void to_json(json& j, const SamplerSettings& s);
void from_json(const json& j, SamplerSettings& s);

void to_json(json& j, const Belief& b);
void from_json(const json& j, Belief& b);

void to_json(json& j, const OptBudget& b);
void from_json(const json& j, OptBudget& b);

void to_json(json& j, const RankingResponse& r);
void from_json(const json& j, RankingResponse& r);

void to_json(json& j, const DemPrefConfig& c);
// Missing keys keep their defaults; present keys must have the right type.
void from_json(const json& j, DemPrefConfig& c);

void to_json(json& j, const TraceRecord& r);
void from_json(const json& j, TraceRecord& r);

void to_json(json& j, const PendingQuery& p);
void from_json(const json& j, PendingQuery& p);

void to_json(json& j, const SessionState& s);
void from_json(const json& j, SessionState& s);

std::string to_string(UpdateMode mode);
UpdateMode update_mode_from_string(const std::string& text);

// Writes `text` to a sibling temporary file and renames it over `path`.
void write_file_atomically(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

}  // namespace dempref
