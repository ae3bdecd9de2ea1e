#include "doctest.h"

#include <atomic>
#include <thread>

#include "helpers.hpp"
#include "httplib.h"
#include "json.hpp"
#include "qsuggest/service.hpp"
#include "qsuggest/synth.hpp"

using namespace qsuggest;
using namespace qsuggest::testing;
using nlohmann::json;

namespace {

struct Fixture {
    std::int64_t now = 1000;
    BackgroundModel bg;
    ModelSet models;

    Fixture() {
        bg.query_prob = {{"apple pie", 0.4}, {"apple tart", 0.1}, {"banana", 0.3}, {"java island", 0.2}};
        auto m = blank_model("java", 2);
        m.state_prior = {0.1, 0.1, 0.4, 0.4};
        set_doc(m, "d1", {0.9, 0.05}, {0.5, 0.5});
        set_doc(m, "d2", {0.05, 0.8}, {0.5, 0.5});
        m.reformulation[0] = {{"apple tart", 0.9}};
        m.reformulation[1] = {{"java island", 0.9}};
        models.emplace("java", m);
    }

    SuggestService make(ServiceConfig config = {}) {
        return SuggestService(models, bg, CandidateIndex::from_background(bg, {}), {}, config, [this] { return now; });
    }
};

json body_of(const Response& r) { return json::parse(r.body); }

std::string open(SuggestService& s, const char* query = "java") {
    const auto r = s.create_session(json{{"query", query}}.dump());
    REQUIRE(r.status == 200);
    return body_of(r)["session"];
}

std::string event(const char* type, const std::string& doc) { return json{{"type", type}, {"doc", doc}}.dump(); }

}  // namespace

TEST_CASE("sessions start with the model SERP and prior marginals") {
    Fixture f;
    auto s = f.make();
    const auto r = s.create_session(R"({"query": "Java"})");
    CHECK(r.status == 200);
    const auto j = body_of(r);
    CHECK(j["session"] == "s1");
    CHECK(j["q0"] == "java");
    CHECK(j["has_model"] == true);
    CHECK(j["schema_version"] == kServiceSchemaVersion);
    REQUIRE(j["serp"].size() == 2);
    CHECK(j["serp"][0]["doc"] == "d1");  // 0.5 * 0.9 + 0.5 * 0.05 beats 0.5 * 0.05 + 0.5 * 0.8
    CHECK(j["posterior"]["p_continue"].get<double>() == doctest::Approx(0.8));
    CHECK(j["posterior"]["intent_dist"][0].get<double>() == doctest::Approx(0.5));

    const auto cold = body_of(s.create_session(R"({"query": "python"})"));
    CHECK(cold["has_model"] == false);
    CHECK(cold["serp"].empty());
    CHECK(s.session_count() == 2);
}

TEST_CASE("malformed requests") {
    Fixture f;
    auto s = f.make();
    CHECK(s.create_session("not json").status == 400);
    CHECK(s.create_session(R"({"query": 3})").status == 400);
    CHECK(s.create_session(R"({"query": "   "})").status == 400);
    const std::string id = open(s);
    CHECK(s.post_event("s99", event("click", "d1")).status == 404);
    CHECK(s.post_event(id, "{}").status == 400);
    CHECK(s.post_event(id, event("hover", "d1")).status == 400);
    CHECK(s.post_event(id, event("click", "d9")).status == 409);
    CHECK(s.suggest({{"prefix", "ap"}, {"variant", "magic"}}).status == 400);
    CHECK(s.suggest({{"variant", "baseline"}}).status == 400);
    CHECK(s.suggest({{"prefix", "ap"}, {"n", "-1"}}).status == 400);
    CHECK(s.suggest({{"prefix", "ap"}, {"n", "ten"}}).status == 400);
    CHECK(s.suggest({{"prefix", "ap"}, {"n", "101"}}).status == 400);
    CHECK(s.suggest({{"prefix", "ap"}, {"session", "s99"}}).status == 404);
    CHECK(s.suggest({{"prefix", "ap"}, {"variant", "fcntx"}}).status == 404);
    CHECK(s.model("python").status == 404);
}

TEST_CASE("suggestions") {
    Fixture f;
    auto s = f.make();
    const auto base = body_of(s.suggest({{"prefix", "app"}}));
    REQUIRE(base["suggestions"].size() == 2);
    CHECK(base["suggestions"][0]["query"] == "apple pie");
    CHECK(base["suggestions"][0]["score"].get<double>() == doctest::Approx(0.4));

    CHECK(body_of(s.suggest({{"prefix", "app"}, {"n", "0"}}))["suggestions"].empty());

    const std::string id = open(s);
    CHECK(s.post_event(id, event("click", "d1")).status == 200);
    const auto ctx = body_of(s.suggest({{"prefix", "app"}, {"session", id}, {"variant", "fcntx"}}));
    CHECK(ctx["suggestions"][0]["query"] == "apple tart");
    CHECK(ctx.contains("posterior"));
    const auto div = body_of(s.suggest({{"prefix", "app"}, {"session", id}, {"variant", "fcntxdiv"}, {"n", "2"}}));
    CHECK(div["step_posteriors"].size() == 2);
}

TEST_CASE("events move the posterior") {
    Fixture f;
    auto s = f.make();
    const std::string id = open(s);
    const auto click = body_of(s.post_event(id, event("click", "d1")));
    CHECK(click["clicks"] == json::array({"d1"}));
    CHECK(click["events"] == 1);
    CHECK(click["posterior"]["intent_dist"][0].get<double>() > 0.9);

    const auto skip = body_of(s.post_event(id, event("skip", "d1")));
    CHECK(skip["clicks"].empty());
    const auto other = body_of(s.post_event(id, event("click", "d2")));
    CHECK(other["posterior"]["intent_dist"][1].get<double>() > 0.9);
}

TEST_CASE("model inspection") {
    Fixture f;
    auto s = f.make();
    const auto j = body_of(s.model("java"));
    CHECK(j["intents"] == 2);
    CHECK(j["state_prior"]["c1"][0].get<double>() == doctest::Approx(0.4));
    CHECK(j["attract"]["d2"][1].get<double>() == doctest::Approx(0.8));
    CHECK(j["reformulation"][1]["java island"].get<double>() == doctest::Approx(0.9));
}

TEST_CASE("idle sessions are evicted") {
    Fixture f;
    auto s = f.make();
    const std::string id = open(s);
    f.now += 300;
    CHECK(s.post_event(id, event("click", "d1")).status == 200);
    f.now += 301;
    CHECK(s.session_count() == 0);
    CHECK(s.post_event(id, event("click", "d1")).status == 404);
    CHECK(open(s) == "s2");
}

TEST_CASE("replaying the same requests gives the same responses") {
    Fixture f;
    std::vector<std::string> runs;
    for (int r = 0; r < 2; ++r) {
        auto s = f.make();
        std::string transcript;
        const std::string id = open(s);
        transcript += s.post_event(id, event("click", "d2")).body;
        transcript += s.suggest({{"prefix", "a"}, {"session", id}, {"variant", "qcntxdiv"}}).body;
        transcript += s.suggest({{"prefix", "j"}, {"session", id}, {"variant", "fcntxdiv"}}).body;
        runs.push_back(transcript);
    }
    CHECK(runs[0] == runs[1]);
}

TEST_CASE("sessions are independent under concurrency") {
    Fixture f;
    auto s = f.make();
    std::vector<std::string> ids;
    for (int k = 0; k < 8; ++k) ids.push_back(open(s));
    std::atomic<int> failures{0};
    std::vector<std::thread> workers;
    for (int k = 0; k < 8; ++k) {
        workers.emplace_back([&, k] {
            const std::string doc = k % 2 ? "d2" : "d1";
            for (int rep = 0; rep < 50; ++rep) {
                if (s.post_event(ids[k], event(rep % 2 ? "skip" : "click", doc)).status != 200) ++failures;
                if (s.suggest({{"prefix", "a"}, {"session", ids[k]}, {"variant", "fcntxdiv"}}).status != 200) {
                    ++failures;
                }
            }
        });
    }
    for (auto& w : workers) w.join();
    CHECK(failures == 0);
    for (int k = 0; k < 8; ++k) {
        const auto j = body_of(s.post_event(ids[k], event("click", k % 2 ? "d2" : "d1")));
        CHECK(j["events"] == 51);
        CHECK(j["clicks"].size() == 1);
    }
}

TEST_CASE("service rankings match the oracle on a synthetic world") {
    RandomWorldOptions o;
    o.seed = 12;
    o.queries = 2;
    o.max_intents = 3;
    o.vocab = 30;
    o.docs_per_query = 6;
    o.serp_size = 3;
    o.reformulations_per_intent = 3;
    o.competitors_per_prefix = 1;
    o.extra_background = 5;
    const WorldSpec w = random_world(o);
    ServiceConfig config;
    config.serp_size = 3;
    SuggestService s(true_models(w, {}), true_background(w, {}), true_index(w, {}), {}, config);
    for (const auto& q : w.queries) {
        const auto created = body_of(s.create_session(json{{"query", q.query}}.dump()));
        const std::string id = created["session"];
        SuggestionContext ctx;
        ctx.history = HistoryKind::Full;
        ctx.q0 = Normalizer().normalize(q.query);
        for (const auto& d : created["serp"]) ctx.serp.doc_ids.push_back(d["doc"]);
        ctx.clicks.assign(ctx.serp.size(), false);
        s.post_event(id, event("click", ctx.serp.doc_ids[1]));
        ctx.clicks[1] = true;

        const std::string prefix = q.intents[0].reformulations[0].query.substr(0, 2);
        const auto got = body_of(s.suggest({{"prefix", prefix}, {"session", id}, {"variant", "fcntxdiv"}, {"n", "4"}}));
        const auto want = oracle_rank(w, prefix, ctx, 4, true);
        REQUIRE(got["suggestions"].size() == want.entries.size());
        for (std::size_t k = 0; k < want.entries.size(); ++k) {
            CHECK(got["suggestions"][k]["query"] == want.entries[k].query);
            CHECK(got["suggestions"][k]["score"].get<double>() == doctest::Approx(want.entries[k].score).epsilon(1e-9));
        }
    }
}

TEST_CASE("http routes") {
    Fixture f;
    auto service = f.make();
    httplib::Server server;
    install_routes(server, service);
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread runner([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    const auto health = client.Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(health->get_header_value(kSchemaHeader) == std::to_string(kServiceSchemaVersion));

    const auto created = client.Post("/session", R"({"query": "java"})", "application/json");
    REQUIRE(created);
    const std::string id = json::parse(created->body)["session"];
    const auto ev = client.Post("/session/" + id + "/event", event("click", "d1"), "application/json");
    REQUIRE(ev);
    CHECK(ev->status == 200);
    const auto missing = client.Post("/session/" + id + "/event", event("click", "zz"), "application/json");
    CHECK(missing->status == 409);
    CHECK(missing->get_header_value(kSchemaHeader) == "1");

    const auto sug = client.Get("/suggest?prefix=app&variant=fcntx&session=" + id);
    REQUIRE(sug);
    CHECK(json::parse(sug->body)["suggestions"][0]["query"] == "apple tart");
    CHECK(client.Get("/models/java")->status == 200);
    CHECK(client.Get("/models/nothing")->status == 404);

    server.stop();
    runner.join();
}
