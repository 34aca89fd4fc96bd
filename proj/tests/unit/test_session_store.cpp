#include <atomic>
#include <filesystem>
#include <thread>

#include <gtest/gtest.h>

#include "dempref/serialization.hpp"
#include "dempref/session_store.hpp"

using namespace dempref;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dempref_store_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

json fast_config(int n_dem, int n_queries) {
  return json{{"n_dem", n_dem},
              {"n_queries", n_queries},
              {"n_opt", 3},
              {"belief_samples", 60},
              {"seed", 9},
              {"sampler", {{"burn_in", 200}, {"thin", 2}}},
              {"budget", {{"restarts", 1}, {"iterations", 2}, {"mc_samples", 60}}}};
}

json demo_body(double accel) {
  json controls = json::array();
  for (int t = 0; t < 5; ++t) controls.push_back({0.1 * t - 0.2, accel});
  return json{{"v", 1}, {"controls", controls}};
}

SessionStoreOptions sync_options(const std::filesystem::path& dir) {
  SessionStoreOptions o;
  o.data_dir = dir;
  o.background = false;
  return o;
}

int http_status_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ServiceError& e) {
    return e.http_status();
  }
  return 200;
}

std::string field_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ServiceError& e) {
    return e.field();
  }
  return "";
}

json ranking(int iteration, std::vector<int> perm) {
  return json{{"v", 1}, {"iteration", iteration}, {"permutation", perm}};
}

}  // namespace

TEST(SessionStore, FullLifecycle) {
  SessionStore store(sync_options(fresh_dir("lifecycle")));
  const json created = store.create_session(fast_config(1, 2));
  const std::string id = created.at("id");
  EXPECT_EQ(created.at("status"), "awaiting_demo");
  EXPECT_EQ(created.at("v"), 1);

  const json waiting = store.get_current_query(id);
  EXPECT_EQ(waiting.at("status"), "awaiting_demo");
  EXPECT_EQ(waiting.at("demos_required"), 1);
  EXPECT_EQ(waiting.at("domain").at("name"), "driver");

  const json accepted = store.submit_demonstration(id, demo_body(0.3));
  EXPECT_EQ(accepted.at("status"), "computing");
  EXPECT_EQ(accepted.at("trajectory").at("states").size(), 51u);

  for (int i = 0; i < 2; ++i) {
    const json q = store.get_current_query(id);
    ASSERT_EQ(q.at("status"), "awaiting_response");
    EXPECT_EQ(q.at("iteration"), i);
    EXPECT_EQ(q.at("query").at("trajectories").size(), 3u);
    EXPECT_EQ(store.get_current_query(id).dump(), q.dump());
    const json r = store.submit_ranking(id, ranking(i, {3, 1, 2}));
    EXPECT_EQ(r.at("iteration"), i + 1);
  }
  const json done = store.get_current_query(id);
  EXPECT_EQ(done.at("status"), "done");
  EXPECT_EQ(done.at("belief").at("sample_count"), 60);

  const SessionRecord rec = store.snapshot(id);
  ASSERT_EQ(rec.state.trace.size(), 2u);
  // 1-based [3, 1, 2] is stored as 0-based option indices, best first.
  EXPECT_EQ(rec.state.trace[0].response.ranking, (std::vector<int>{2, 0, 1}));
  EXPECT_EQ(rec.state.trace[0].response.responder, Responder::live);

  const json belief = store.get_belief(id);
  EXPECT_EQ(belief.at("belief").at("samples").size(), 60u);
  EXPECT_EQ(belief.at("iteration"), 2);
}

TEST(SessionStore, RejectsInvalidConfigsWithTheField) {
  SessionStore store(sync_options(fresh_dir("config")));
  EXPECT_EQ(field_of([&] { store.create_session(json{{"n_opt", 9}}); }), "n_opt");
  EXPECT_EQ(field_of([&] { store.create_session(json{{"n_opt", "three"}}); }), "n_opt");
  EXPECT_EQ(field_of([&] { store.create_session(json{{"beta_response", -1}}); }), "beta_response");
  EXPECT_EQ(field_of([&] { store.create_session(json{{"n_dem", 0}, {"use_ic", true}}); }), "use_ic");
  EXPECT_EQ(field_of([&] { store.create_session(json{{"update_mode", "pick_best"}}); }), "update_mode");
  EXPECT_EQ(field_of([&] { store.create_session(json{{"budget", {{"restarts", 0}}}}); }), "budget.restarts");
  EXPECT_EQ(field_of([&] { store.create_session(json{{"colour", 1}}); }), "colour");
  EXPECT_EQ(http_status_of([&] { store.create_session(json::array()); }), 422);
  EXPECT_TRUE(store.session_ids().empty());
}

TEST(SessionStore, DemonstrationErrors) {
  SessionStore store(sync_options(fresh_dir("demo")));
  const std::string id = store.create_session(fast_config(1, 1)).at("id");
  EXPECT_EQ(http_status_of([&] { store.submit_demonstration("ffff", demo_body(0)); }), 404);
  EXPECT_EQ(field_of([&] { store.submit_demonstration(id, demo_body(1.5)); }), "controls[0][1]");
  json short_body = demo_body(0);
  short_body["controls"].erase(0);
  EXPECT_EQ(http_status_of([&] { store.submit_demonstration(id, short_body); }), 422);
  EXPECT_EQ(http_status_of([&] { store.submit_ranking(id, ranking(0, {1, 2, 3})); }), 409);
  store.submit_demonstration(id, demo_body(0));
  EXPECT_EQ(http_status_of([&] { store.submit_demonstration(id, demo_body(0)); }), 409);
}

TEST(SessionStore, RankingErrorsAndExactlyOnce) {
  SessionStore store(sync_options(fresh_dir("ranking")));
  const std::string id = store.create_session(fast_config(0, 3)).at("id");
  EXPECT_EQ(http_status_of([&] { store.submit_ranking(id, ranking(0, {1, 1, 2})); }), 422);
  EXPECT_EQ(http_status_of([&] { store.submit_ranking(id, ranking(0, {0, 1, 2})); }), 422);
  EXPECT_EQ(http_status_of([&] { store.submit_ranking(id, ranking(0, {1, 2})); }), 422);
  EXPECT_EQ(http_status_of([&] { store.submit_ranking(id, json{{"permutation", {1, 2, 3}}}); }), 422);
  EXPECT_EQ(http_status_of([&] { store.submit_ranking(id, ranking(1, {1, 2, 3})); }), 409);
  EXPECT_EQ(store.snapshot(id).state.iteration, 0);
  store.submit_ranking(id, ranking(0, {1, 2, 3}));
  EXPECT_EQ(http_status_of([&] { store.submit_ranking(id, ranking(0, {1, 2, 3})); }), 409);
  EXPECT_EQ(store.snapshot(id).state.trace.size(), 1u);
}

TEST(SessionStore, ConcurrentDuplicateSubmissionsApplyOnce) {
  SessionStore store(sync_options(fresh_dir("concurrent")));
  const std::string id = store.create_session(fast_config(0, 2)).at("id");
  std::atomic<int> ok{0}, conflict{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&] {
      const int status = http_status_of([&] { store.submit_ranking(id, ranking(0, {2, 1, 3})); });
      (status == 200 ? ok : conflict)++;
    });
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok.load(), 1);
  EXPECT_EQ(conflict.load(), 3);
  EXPECT_EQ(store.snapshot(id).state.iteration, 1);
}

TEST(SessionStore, ZeroQuerySessionIsDoneAfterStageOne) {
  SessionStore store(sync_options(fresh_dir("zero")));
  const std::string id = store.create_session(fast_config(0, 0)).at("id");
  EXPECT_EQ(store.status(id), SessionStatus::done);
}

TEST(SessionStore, PersistsAndResumesAcrossRestarts) {
  const auto dir = fresh_dir("resume");
  std::string id;
  json expected_query;
  {
    SessionStore store(sync_options(dir));
    id = store.create_session(fast_config(0, 3)).at("id");
    store.submit_ranking(id, ranking(0, {1, 3, 2}));
    expected_query = store.get_current_query(id);
  }
  {
    SessionStore store(sync_options(dir));
    EXPECT_EQ(store.get_current_query(id).dump(), expected_query.dump());
  }
  // Simulate a crash while the next query was being computed.
  json file = json::parse(read_file(dir / (id + ".json")));
  file["status"] = "computing";
  file["pending"] = nullptr;
  write_file_atomically(dir / (id + ".json"), file.dump());
  SessionStore store(sync_options(dir));
  EXPECT_EQ(store.get_current_query(id).dump(), expected_query.dump());
}

TEST(SessionStore, BackgroundWorkersSettle) {
  SessionStoreOptions o = sync_options(fresh_dir("background"));
  o.background = true;
  o.workers = 2;
  SessionStore store(o);
  std::vector<std::string> ids;
  for (int i = 0; i < 3; ++i) ids.push_back(store.create_session(fast_config(0, 1)).at("id"));
  for (const auto& id : ids) {
    store.wait_until_settled(id);
    EXPECT_EQ(store.status(id), SessionStatus::awaiting_response);
  }
  store.submit_ranking(ids[0], ranking(0, {1, 2, 3}));
  store.wait_until_settled(ids[0]);
  EXPECT_EQ(store.status(ids[0]), SessionStatus::done);
}

TEST(SessionStore, IdenticalSessionsProduceIdenticalFiles) {
  const auto dir = fresh_dir("determinism");
  SessionStore store(sync_options(dir));
  std::vector<std::string> ids;
  for (int s = 0; s < 2; ++s) {
    const std::string id = store.create_session(fast_config(1, 2)).at("id");
    store.submit_demonstration(id, demo_body(0.4));
    store.submit_ranking(id, ranking(0, {2, 3, 1}));
    store.submit_ranking(id, ranking(1, {1, 2, 3}));
    ids.push_back(id);
  }
  ASSERT_NE(ids[0], ids[1]);
  std::string a = read_file(store.session_path(ids[0]));
  std::string b = read_file(store.session_path(ids[1]));
  a.replace(a.find(ids[0]), ids[0].size(), "ID");
  b.replace(b.find(ids[1]), ids[1].size(), "ID");
  EXPECT_EQ(a, b);
}
