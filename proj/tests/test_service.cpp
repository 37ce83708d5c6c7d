#include "aspl/experiment.hpp"
#include "aspl/io_service.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <map>
#include <thread>

using namespace aspl;
using Json = nlohmann::json;
using namespace std::chrono_literals;

namespace {

struct Live {
    FeatureStore train;
    std::map<std::string, std::string> truth;  // sample id -> category name
    AnnotationHub hub{5s};
    HumanOracle oracle{hub};
    AnnotationService service{hub};
    int port = 0;

    Live() {
        SyntheticSpec s;
        s.clusters = 3;
        s.per_cluster = 15;
        s.dim = 3;
        train = generate_synthetic(s);
        for (Index i = 0; i < train.size(); ++i) truth[train.sample_id(i)] = *train.truth_name(i);
        port = service.start("127.0.0.1", 0);
    }
    ~Live() {
        hub.shutdown();
        service.stop();
    }
};

httplib::Result post(httplib::Client& c, const std::string& path, const Json& body) {
    return c.Post(path, body.dump(), "application/json");
}

// Answers every pending query with the truth until `stop` is set.
void annotate_until(Live& live, const std::atomic<bool>& stop) {
    httplib::Client c("127.0.0.1", live.port);
    while (!stop) {
        if (!live.hub.wait_for_pending(50ms)) continue;
        const auto res = c.Get("/api/queries");
        if (!res || res->status != 200) continue;
        const auto body = Json::parse(res->body);
        for (const auto& q : body["queries"]) {
            const auto id = q["sample_id"].get<std::string>();
            post(c, "/api/labels", {{"sample_id", id}, {"category", "new:" + live.truth.at(id)}});
        }
    }
}

}  // namespace

TEST_CASE("address parsing") {
    CHECK(parse_address("8080") == std::pair<std::string, int>{"127.0.0.1", 8080});
    CHECK(parse_address(":9") == std::pair<std::string, int>{"127.0.0.1", 9});
    CHECK(parse_address("0.0.0.0:80") == std::pair<std::string, int>{"0.0.0.0", 80});
    CHECK_THROWS_AS(parse_address("host:port"), DomainError);
    CHECK_THROWS_AS(parse_address("70000"), DomainError);
}

TEST_CASE("engine driven through the HTTP annotation API") {
    Live live;
    EngineConfig config;
    config.max_iters = 3;
    config.batch_size = 3;
    Engine engine(live.train, std::nullopt, config, Strategy::aspl, live.oracle);

    std::atomic<bool> stop{false};
    std::thread annotator(annotate_until, std::ref(live), std::cref(stop));
    engine.initialize(1);
    live.hub.publish(engine);
    for (int k = 0; k < 3; ++k) {
        engine.run_iteration();
        live.hub.publish(engine);
    }
    stop = true;
    annotator.join();

    httplib::Client c("127.0.0.1", live.port);
    const auto metrics = c.Get("/api/metrics");
    REQUIRE(metrics);
    CHECK(metrics->status == 200);
    const auto records = Json::parse(metrics->body)["records"];
    CHECK(records.size() == 3);
    CHECK(records[2]["t"] == 3);

    const auto status = Json::parse(c.Get("/api/status")->body);
    CHECK(status["iteration"] == 3);
    CHECK(status["categories"].size() == 3);
    CHECK(status["annotated"].get<int>() > 3);
    CHECK(status["running"] == false);
    CHECK(status["pending"] == 0);
}

TEST_CASE("label submissions: accepted, 409, 422, 400") {
    Live live;
    std::vector<std::string> cats{"c0", "c1"};
    std::vector<Query> batch;
    for (Index i : {0, 16, 31}) {
        Query q;
        q.sample = i;
        q.sample_id = live.train.sample_id(i);
        q.scores = {0.1, -0.2};
        batch.push_back(q);
    }
    std::vector<OracleAnswer> answers;
    std::thread engine([&] { answers = live.hub.exchange(batch, cats); });
    REQUIRE(live.hub.wait_for_pending(2s));
    while (live.hub.pending_count() < 3) std::this_thread::sleep_for(1ms);

    httplib::Client c("127.0.0.1", live.port);
    const auto queries = Json::parse(c.Get("/api/queries")->body)["queries"];
    REQUIRE(queries.size() == 3);
    CHECK(queries[0]["kind"] == "label");
    CHECK(queries[0]["candidates"][1]["category"] == "c1");

    auto r = post(c, "/api/labels", {{"sample_id", "s0"}, {"category", "c0"}});
    CHECK(r->status == 200);
    CHECK(Json::parse(r->body)["pending"] == 2);
    CHECK(Json::parse(c.Get("/api/status")->body)["pending"] == 2);

    CHECK(post(c, "/api/labels", {{"sample_id", "s0"}, {"category", "c0"}})->status == 409);
    CHECK(post(c, "/api/labels", {{"sample_id", "s999"}, {"category", "c0"}})->status == 409);
    CHECK(post(c, "/api/labels", {{"sample_id", "s16"}, {"category", "zed"}})->status == 422);
    CHECK(c.Post("/api/labels", "{not json", "application/json")->status == 400);
    CHECK(post(c, "/api/labels", {{"sample_id", 16}})->status == 400);

    // A category announced through the API becomes a valid answer.
    CHECK(post(c, "/api/categories", {{"name", "zed"}})->status == 201);
    CHECK(post(c, "/api/categories", {{"name", "zed"}})->status == 409);
    CHECK(post(c, "/api/categories", {{"name", "c1"}})->status == 409);
    CHECK(post(c, "/api/categories", {{"name", "unknown"}})->status == 422);
    CHECK(post(c, "/api/categories", {{"title", "x"}})->status == 400);
    CHECK(post(c, "/api/labels", {{"sample_id", "s16"}, {"category", "zed"}})->status == 200);
    CHECK(post(c, "/api/labels", {{"sample_id", "s31"}, {"category", "unknown"}})->status == 200);

    engine.join();
    REQUIRE(answers.size() == 3);
    CHECK(answers[0].category == OracleLabel{KnownCategory{0}});
    CHECK(answers[1].category == OracleLabel{NewCategory{"zed"}});
    CHECK(answers[2].category == OracleLabel{UnknownCategory{}});
    CHECK(live.hub.pending_count() == 0);
}

TEST_CASE("unanswered queries time out and are dropped") {
    AnnotationHub hub(50ms);
    Query q;
    q.sample = 0;
    q.sample_id = "s0";
    const std::vector<std::string> cats{"a"};
    const auto answers = hub.exchange(std::span<const Query>(&q, 1), cats);
    CHECK(answers.empty());
    CHECK(hub.pending_count() == 0);
    CHECK(hub.submit("s0", "a") == SubmitResult::not_pending);
}

TEST_CASE("shutdown releases a blocked exchange") {
    AnnotationHub hub(10s);
    Query q;
    q.sample_id = "s0";
    const std::vector<std::string> cats{"a"};
    std::thread t([&] { CHECK(hub.exchange(std::span<const Query>(&q, 1), cats).empty()); });
    REQUIRE(hub.wait_for_pending(2s));
    hub.shutdown();
    t.join();
    CHECK(hub.exchange(std::span<const Query>(&q, 1), cats).empty());
}
