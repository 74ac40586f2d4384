#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "promobn/error.hpp"
#include "promobn/inference.hpp"
#include "promobn/parser.hpp"
#include "service.hpp"

using namespace promobn;
using json = nlohmann::json;

namespace {

const std::string kFig2 = std::string(PROMOBN_DATA_DIR) + "/fig2.bnet";

std::string fig2_text() {
    std::ifstream in(kFig2);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class ServiceTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        service_ = new service::WhatIfService(service::ServiceOptions{42, 10000, 20000, 2});
        server_ = new httplib::Server;
        service_->register_routes(*server_);
        port_ = server_->bind_to_any_port("127.0.0.1");
        thread_ = new std::thread([] { server_->listen_after_bind(); });
        server_->wait_until_ready();
    }

    static void TearDownTestSuite() {
        server_->stop();
        thread_->join();
        delete thread_;
        delete server_;
        delete service_;
    }

    httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

    std::string create_session() {
        auto res = client().Post("/sessions", json{{"dsl", fig2_text()}}.dump(), "application/json");
        EXPECT_EQ(res->status, 201) << res->body;
        return json::parse(res->body)["session_id"].get<std::string>();
    }

    json get(const std::string& path, int expected = 200) {
        auto res = client().Get(path.c_str());
        EXPECT_TRUE(res);
        EXPECT_EQ(res->status, expected) << path << ": " << res->body;
        EXPECT_EQ(res->get_header_value("Content-Type"), "application/json");
        return json::parse(res->body);
    }

    json post(const std::string& path, const json& body, int expected = 200) {
        auto res = client().Post(path.c_str(), body.dump(), "application/json");
        EXPECT_TRUE(res);
        EXPECT_EQ(res->status, expected) << path << ": " << res->body;
        return json::parse(res->body);
    }

    static std::vector<double> promotions(const json& posteriors) {
        for (const auto& node : posteriors["posteriors"]) {
            if (node["node"] == "Promotions") {
                return node["probabilities"].get<std::vector<double>>();
            }
        }
        return {};
    }

    static inline service::WhatIfService* service_ = nullptr;
    static inline httplib::Server* server_ = nullptr;
    static inline std::thread* thread_ = nullptr;
    static inline int port_ = 0;
};

}  // namespace

TEST_F(ServiceTest, CreateSessionListsNodesAndStates) {
    auto res = client().Post("/sessions", json{{"dsl", fig2_text()}}.dump(), "application/json");
    ASSERT_EQ(res->status, 201);
    const json body = json::parse(res->body);
    EXPECT_FALSE(body["session_id"].get<std::string>().empty());
    EXPECT_EQ(body["nodes"], (json{"Promotions", "Price", "ProductLocation", "Sales"}));
    EXPECT_EQ(body["states"]["Promotions"], (json{"Catalogue", "InStore", "NoPromotion"}));
    EXPECT_FALSE(body["states"].contains("Sales"));
}

TEST_F(ServiceTest, CreateSessionFromRawText) {
    auto res = client().Post("/sessions", fig2_text(), "text/plain");
    ASSERT_EQ(res->status, 201) << res->body;
    const std::string id = json::parse(res->body)["session_id"];
    const json net = get("/sessions/" + id + "/network");
    EXPECT_EQ(parse_network(net["dsl"].get<std::string>()), load_network(kFig2));
}

TEST_F(ServiceTest, MalformedBodiesAre400) {
    auto res = client().Post("/sessions", "{not json", "application/json");
    EXPECT_EQ(res->status, 400);
    EXPECT_TRUE(json::parse(res->body).contains("error"));
    res = client().Post("/sessions", json{{"text", "x"}}.dump(), "application/json");
    EXPECT_EQ(res->status, 400);
    res = client().Post("/sessions", "network \"x\" { node A { kind: chance; states: [a]; } }", "text/plain");
    EXPECT_EQ(res->status, 400);
    const json err = json::parse(res->body);
    EXPECT_EQ(err["line"], 1);
    const std::string id = create_session();
    post("/sessions/" + id + "/evidence", json{{"state", "Catalogue"}}, 400);
    post("/sessions/" + id + "/evidence", json{{"node", "Promotions"}}, 400);
    post("/sessions/" + id + "/evidence", json{{"node", "Promotions"}, {"state", "Flash"}}, 400);
    post("/sessions/" + id + "/evidence", json{{"node", "Sales"}, {"value", "many"}}, 400);
    post("/sessions/" + id + "/weights", json{{"price", 0.5}}, 400);
    get("/sessions/" + id + "/posteriors?method=gibbs", 400);
    get("/sessions/" + id + "/forecast?n=abc", 400);
}

TEST_F(ServiceTest, UnknownSessionIs404) {
    get("/sessions/deadbeef/network", 404);
    get("/sessions/deadbeef/posteriors", 404);
    post("/sessions/deadbeef/evidence", json{{"node", "Promotions"}, {"state", "InStore"}}, 404);
    auto res = client().Delete("/sessions/deadbeef/evidence");
    EXPECT_EQ(res->status, 404);
}

TEST_F(ServiceTest, SalesEvidenceGivesEnginePosterior) {
    const std::string id = create_session();
    post("/sessions/" + id + "/evidence", json{{"node", "Sales"}, {"value", 175}});
    const json body = get("/sessions/" + id + "/posteriors");
    EXPECT_EQ(body["method"], "convolution-density");
    const PosteriorReport expected =
        posterior_given_equation_evidence(load_network(kFig2), 175, PosteriorMethod::ConvolutionDensity);
    EXPECT_EQ(promotions(body), expected.at("Promotions").probabilities);
    EXPECT_EQ(body["evidence"]["Sales"]["bandwidth"], 5.0);
}

TEST_F(ServiceTest, ClearingEvidenceRestoresPriors) {
    const std::string id = create_session();
    const json before = get("/sessions/" + id + "/posteriors");
    EXPECT_EQ(promotions(before), (std::vector<double>{0.47, 0.08, 0.45}));
    post("/sessions/" + id + "/evidence", json{{"node", "Sales"}, {"value", 175}});
    post("/sessions/" + id + "/evidence", json{{"node", "ProductLocation"}, {"state", "Fixture"}});
    EXPECT_NE(promotions(get("/sessions/" + id + "/posteriors")), promotions(before));
    auto res = client().Delete(("/sessions/" + id + "/evidence").c_str());
    ASSERT_EQ(res->status, 200);
    EXPECT_EQ(get("/sessions/" + id + "/posteriors"), before);
}

TEST_F(ServiceTest, InconsistentEvidenceIsRejectedAndNotStored) {
    const std::string id = create_session();
    post("/sessions/" + id + "/evidence", json{{"node", "Price"}, {"state", "Normal"}});
    const json err = post("/sessions/" + id + "/evidence", json{{"node", "Promotions"}, {"state", "Catalogue"}}, 400);
    EXPECT_TRUE(err.contains("error"));
    const json net = get("/sessions/" + id + "/network");
    EXPECT_EQ(net["evidence"], (json{{"Price", {{"state", "Normal"}}}}));
    post("/sessions/" + id + "/evidence", json{{"node", "Sales"}, {"value", 175}}, 400);
}

TEST_F(ServiceTest, KdeMethodAndSeedAreHonoured) {
    const std::string id = create_session();
    post("/sessions/" + id + "/evidence", json{{"node", "Sales"}, {"value", 175}, {"bandwidth", 4}});
    const json a = get("/sessions/" + id + "/posteriors?method=kde&seed=5&n=5000");
    const json b = get("/sessions/" + id + "/posteriors?method=kde&seed=5&n=5000");
    EXPECT_EQ(a["method"], "monte-carlo-kde");
    EXPECT_EQ(a, b);
    EXPECT_NE(promotions(a), promotions(get("/sessions/" + id + "/posteriors?method=kde&seed=6&n=5000")));
}

TEST_F(ServiceTest, ForecastIsReproducibleWithFixedHistogram) {
    const std::string id = create_session();
    const json a = get("/sessions/" + id + "/forecast?n=4000&seed=9");
    const json b = get("/sessions/" + id + "/forecast?n=4000&seed=9");
    EXPECT_EQ(a, b);
    EXPECT_EQ(a["histogram"]["bins"], 50);
    const auto counts = a["histogram"]["counts"].get<std::vector<std::size_t>>();
    ASSERT_EQ(counts.size(), 50u);
    std::size_t total = 0;
    for (std::size_t c : counts) {
        total += c;
    }
    EXPECT_EQ(total, 4000u);
    const MeanCI ci = equation_mean_ci(forward_sample(load_network(kFig2), 4000, 9));
    EXPECT_EQ(a["mean"].get<double>(), ci.mean);
    EXPECT_EQ(a["ci"][0].get<double>(), ci.lower);
    EXPECT_EQ(a["ci"][1].get<double>(), ci.upper);
}

TEST_F(ServiceTest, ForecastFollowsClampedEvidence) {
    const std::string id = create_session();
    post("/sessions/" + id + "/evidence", json{{"node", "Promotions"}, {"state", "Catalogue"}});
    const json f = get("/sessions/" + id + "/forecast?n=10000&seed=42");
    EXPECT_GT(f["mean"].get<double>(), 325.34);
    EXPECT_LT(f["mean"].get<double>(), 327.54);
    EXPECT_NEAR(f["analytic_mean"].get<double>(), 326.49, 0.01);
}

TEST_F(ServiceTest, WeightsRebuildFromOriginal) {
    const std::string id = create_session();
    const json first = post("/sessions/" + id + "/weights", json{{"price", 0.25}, {"promotions", 0.30}, {"location", 0.45}});
    EXPECT_NEAR(first["analytic_mean"].get<double>(), 168.45, 0.01);
    const json second = post("/sessions/" + id + "/weights", json{{"price", 0.25}, {"promotions", 0.75}, {"location", 0}});
    EXPECT_NEAR(second["analytic_mean"].get<double>(), first["analytic_mean"].get<double>(), 1e-9);
    const json net = get("/sessions/" + id + "/network");
    EXPECT_EQ(net["weights"]["promotions"], 0.75);
    EXPECT_EQ(parse_network(net["dsl"].get<std::string>()).at("Sales").expr.terms.size(), 2u);
    post("/sessions/" + id + "/weights", json{{"price", 0.5}, {"promotions", 0.5}, {"location", 0.5}}, 400);
}

TEST_F(ServiceTest, SessionsAreIndependentUnderConcurrency) {
    std::vector<std::string> ids;
    for (int i = 0; i < 4; ++i) {
        ids.push_back(create_session());
    }
    std::vector<std::thread> threads;
    std::vector<int> failures(ids.size(), 0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        threads.emplace_back([&, i] {
            httplib::Client c("127.0.0.1", port_);
            const std::string state = i % 2 == 0 ? "Catalogue" : "InStore";
            for (int k = 0; k < 5; ++k) {
                auto r = c.Post(("/sessions/" + ids[i] + "/evidence").c_str(),
                                json{{"node", "Promotions"}, {"state", state}}.dump(), "application/json");
                auto p = c.Get(("/sessions/" + ids[i] + "/posteriors").c_str());
                if (!r || !p || r->status != 200 || p->status != 200) {
                    ++failures[i];
                    continue;
                }
                const auto probs = promotions(json::parse(p->body));
                if (probs[i % 2 == 0 ? 0 : 1] != 1.0) {
                    ++failures[i];
                }
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    for (int f : failures) {
        EXPECT_EQ(f, 0);
    }
}

TEST(ResolvePort, FlagBeatsEnvBeatsDefault) {
    unsetenv(service::kPortEnv);
    EXPECT_EQ(service::resolve_port(std::nullopt), 8080);
    setenv(service::kPortEnv, "9191", 1);
    EXPECT_EQ(service::resolve_port(std::nullopt), 9191);
    EXPECT_EQ(service::resolve_port(7000), 7000);
    setenv(service::kPortEnv, "http", 1);
    EXPECT_THROW(service::resolve_port(std::nullopt), InputError);
    unsetenv(service::kPortEnv);
}
