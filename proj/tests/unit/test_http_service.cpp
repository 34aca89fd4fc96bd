#include <chrono>
#include <filesystem>
#include <thread>

#include <gtest/gtest.h>

// Before httplib.h: <resolv.h> defines a _res macro that breaks Eigen.
#include "dempref/http_service.hpp"
#include "dempref/serialization.hpp"

#include <httplib.h>

using namespace dempref;

namespace {

json fast_config(int n_dem, int n_queries) {
  return json{{"n_dem", n_dem},
              {"n_queries", n_queries},
              {"n_opt", 2},
              {"belief_samples", 40},
              {"seed", 4},
              {"sampler", {{"burn_in", 100}, {"thin", 2}}},
              {"budget", {{"restarts", 1}, {"iterations", 2}, {"mc_samples", 40}}}};
}

class HttpServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    SessionStoreOptions o;
    o.data_dir = std::filesystem::temp_directory_path() /
                 ("dempref_http_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(o.data_dir);
    store = std::make_unique<SessionStore>(o);
    HttpServiceOptions h;
    h.port = 0;
    service = std::make_unique<HttpService>(*store, h);
    service->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", service->port());
  }

  void TearDown() override {
    service->stop();
    service.reset();
    store.reset();
  }

  httplib::Result post(const std::string& path, const json& body) {
    return client->Post(path, body.dump(), "application/json");
  }

  // Polls until the session leaves "computing".
  json poll_query(const std::string& id) {
    for (int i = 0; i < 600; ++i) {
      auto res = client->Get("/sessions/" + id + "/query");
      EXPECT_TRUE(res);
      if (res->status == 202) {
        EXPECT_TRUE(res->has_header("Retry-After"));
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        continue;
      }
      EXPECT_EQ(res->status, 200);
      return json::parse(res->body);
    }
    ADD_FAILURE() << "session never settled";
    return {};
  }

  std::unique_ptr<SessionStore> store;
  std::unique_ptr<HttpService> service;
  std::unique_ptr<httplib::Client> client;
};

}  // namespace

TEST_F(HttpServiceTest, CompleteSession) {
  auto created = post("/sessions", fast_config(1, 2));
  ASSERT_TRUE(created);
  ASSERT_EQ(created->status, 201);
  const std::string id = json::parse(created->body).at("id");

  json controls = json::array();
  for (int t = 0; t < 5; ++t) controls.push_back({0.0, 0.2});
  auto demo = post("/sessions/" + id + "/demonstrations", json{{"v", 1}, {"controls", controls}});
  ASSERT_EQ(demo->status, 200);

  for (int i = 0; i < 2; ++i) {
    const json q = poll_query(id);
    ASSERT_EQ(q.at("status"), "awaiting_response");
    ASSERT_EQ(q.at("iteration"), i);
    auto r = post("/sessions/" + id + "/ranking", json{{"v", 1}, {"iteration", i}, {"permutation", {2, 1}}});
    ASSERT_EQ(r->status, 200);
    auto dup = post("/sessions/" + id + "/ranking", json{{"v", 1}, {"iteration", i}, {"permutation", {2, 1}}});
    EXPECT_EQ(dup->status, 409);
  }
  EXPECT_EQ(poll_query(id).at("status"), "done");

  auto belief = client->Get("/sessions/" + id + "/belief");
  ASSERT_EQ(belief->status, 200);
  EXPECT_EQ(json::parse(belief->body).at("belief").at("samples").size(), 40u);

  // Every submitted permutation is in the session file, converted to 0-based.
  const json file = json::parse(read_file(store->session_path(id)));
  for (const json& rec : file.at("state").at("trace"))
    EXPECT_EQ(rec.at("response").at("ranking"), json({1, 0}));
}

TEST_F(HttpServiceTest, ErrorStatuses) {
  auto bad_config = post("/sessions", json{{"n_opt", 12}});
  ASSERT_EQ(bad_config->status, 422);
  const json err = json::parse(bad_config->body);
  EXPECT_EQ(err.at("field"), "n_opt");
  EXPECT_EQ(err.at("v"), 1);

  auto malformed = client->Post("/sessions", "{not json", "application/json");
  EXPECT_EQ(malformed->status, 400);

  EXPECT_EQ(client->Get("/sessions/0123abcd/query")->status, 404);
  EXPECT_EQ(client->Get("/sessions/0123abcd/belief")->status, 404);

  const std::string id = json::parse(post("/sessions", fast_config(0, 1))->body).at("id");
  poll_query(id);
  auto not_bijection = post("/sessions/" + id + "/ranking", json{{"iteration", 0}, {"permutation", {1, 1}}});
  EXPECT_EQ(not_bijection->status, 422);
  auto wrong_iteration = post("/sessions/" + id + "/ranking", json{{"iteration", 3}, {"permutation", {1, 2}}});
  EXPECT_EQ(wrong_iteration->status, 409);
  auto demo = post("/sessions/" + id + "/demonstrations", json{{"controls", json::array()}});
  EXPECT_EQ(demo->status, 422);
}

TEST_F(HttpServiceTest, DomainEndpoint) {
  auto res = client->Get("/domain");
  ASSERT_EQ(res->status, 200);
  const json body = json::parse(res->body);
  EXPECT_EQ(body.at("domain").at("horizon"), 5);
  EXPECT_EQ(body.at("domain").at("driver").at("steering_gain"), 2.0);
}
