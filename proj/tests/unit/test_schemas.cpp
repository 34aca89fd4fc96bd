#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "dempref/experiment.hpp"
#include "dempref/serialization.hpp"
#include "dempref/session_store.hpp"
#include "support/json_schema.hpp"

using namespace dempref;
using dempref::test_support::validate_definition;

namespace {

json load_schema(const std::string& file) {
  return json::parse(read_file(std::filesystem::path(DEMPREF_SCHEMA_DIR) / file));
}

std::string joined(const std::vector<std::string>& errors) {
  std::string out;
  for (const auto& e : errors) out += e + "\n";
  return out;
}

#define EXPECT_VALID(root, def, instance)                                         \
  do {                                                                            \
    const auto errors = validate_definition(root, def, instance);                 \
    EXPECT_TRUE(errors.empty()) << def << ":\n" << joined(errors) << (instance).dump(); \
  } while (0)

json fast_config(int n_dem, int n_queries) {
  return json{{"v", 1},
              {"n_dem", n_dem},
              {"n_queries", n_queries},
              {"n_opt", 3},
              {"belief_samples", 40},
              {"seed", 3},
              {"sampler", {{"burn_in", 100}, {"thin", 2}}},
              {"budget", {{"restarts", 1}, {"iterations", 2}, {"mc_samples", 40}}}};
}

}  // namespace

TEST(Schemas, ServicePayloadsConform) {
  const json root = load_schema("service.schema.json");
  SessionStoreOptions o;
  o.data_dir = std::filesystem::temp_directory_path() / "dempref_schema_store";
  std::filesystem::remove_all(o.data_dir);
  o.background = false;
  SessionStore store(o);

  const json request = fast_config(1, 1);
  EXPECT_VALID(root, "session_create_request", request);
  const json created = store.create_session(request);
  EXPECT_VALID(root, "session_created", created);
  const std::string id = created.at("id");
  EXPECT_VALID(root, "query_response", store.get_current_query(id));

  json controls = json::array();
  for (int t = 0; t < 5; ++t) controls.push_back({0.0, 0.5});
  const json demo{{"v", 1}, {"controls", controls}};
  EXPECT_VALID(root, "demonstration_request", demo);
  EXPECT_VALID(root, "demonstration_accepted", store.submit_demonstration(id, demo));

  const json query = store.get_current_query(id);
  EXPECT_EQ(query.at("status"), "awaiting_response");
  EXPECT_VALID(root, "query_response", query);
  EXPECT_VALID(root, "trajectory", query.at("query").at("trajectories")[0]);

  const json rank{{"v", 1}, {"iteration", 0}, {"permutation", {2, 1, 3}}};
  EXPECT_VALID(root, "ranking_request", rank);
  EXPECT_VALID(root, "ranking_accepted", store.submit_ranking(id, rank));
  EXPECT_VALID(root, "query_response", store.get_current_query(id));
  EXPECT_VALID(root, "belief_response", store.get_belief(id));

  try {
    store.submit_ranking(id, rank);
    FAIL();
  } catch (const ServiceError& e) {
    EXPECT_VALID(root, "error", e.body());
  }
}

TEST(Schemas, RejectNonconformingPayloads) {
  const json root = load_schema("service.schema.json");
  EXPECT_FALSE(validate_definition(root, "ranking_request", json{{"iteration", 0}}).empty());
  EXPECT_FALSE(validate_definition(root, "ranking_request", json{{"iteration", 0}, {"permutation", {0, 1}}}).empty());
  EXPECT_FALSE(validate_definition(root, "session_create_request", json{{"n_opt", 7}}).empty());
  EXPECT_FALSE(validate_definition(root, "query_response", json{{"v", 1}, {"status", "computing"}}).empty());
}

TEST(Schemas, ResultLinesConform) {
  const json root = load_schema("results.schema.json");
  ResultTable t;
  t.experiment = "init_demos";
  t.config = json{{"reps", 1}};
  t.rows.push_back({"n_dem=0", 1, 0, 0.25});
  t.rows.push_back({"n_dem=0", 1, 1, -0.5});
  t.failures.push_back({"n_dem=1", 1, "sampler diverged"});
  std::istringstream in(to_jsonl(t));
  std::string line;
  std::getline(in, line);
  EXPECT_VALID(root, "header", json::parse(line));
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_VALID(root, "row", json::parse(line));
    ++rows;
  }
  EXPECT_EQ(rows, 2);
}
