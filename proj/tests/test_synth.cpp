#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

#include "helpers.hpp"
#include "qsuggest/error.hpp"
#include "qsuggest/synth.hpp"

using namespace qsuggest;
using namespace qsuggest::testing;

namespace {

/// One query, one SERP slot, one intent reformulating to "jazz".
WorldSpec tiny_world() {
    WorldSpec w;
    w.seed = 3;
    w.serp_size = 1;
    w.background = {{"jam", 3.0}, {"jazz", 1.0}};
    WorldQuery q;
    q.query = "java";
    q.interactions = 10;
    q.docs = {"d"};
    WorldIntent intent;
    intent.attract = {{"d", 0.5}};
    intent.satisfy = {{"d", 0.5}};
    intent.reformulations = {{"jazz", 1.0}};
    q.intents.push_back(intent);
    w.queries.push_back(q);
    return w;
}

RandomWorldOptions small_options(std::uint64_t seed) {
    RandomWorldOptions o;
    o.seed = seed;
    o.queries = 2;
    o.max_intents = 3;
    o.vocab = 30;
    o.docs_per_query = 6;
    o.serp_size = 3;
    o.reformulations_per_intent = 3;
    o.competitors_per_prefix = 1;
    o.extra_background = 5;
    o.interactions_per_query = 300;
    o.filler_sessions = 40;
    return o;
}

SuggestionContext context_for(const std::string& q0, HistoryKind kind) {
    SuggestionContext ctx;
    ctx.history = kind;
    ctx.q0 = Normalizer().normalize(q0);
    return ctx;
}

std::vector<bool> produced_clicks(const LatentTrace& t) {
    std::vector<bool> clicks(t.examined.size());
    for (std::size_t j = 0; j < clicks.size(); ++j) clicks[j] = t.examined[j] && t.attracted[j];
    return clicks;
}

std::string log_text(const SyntheticLog& log) {
    std::ostringstream out;
    write_event_log(out, log.events);
    write_truth(out, log.truth);
    return out.str();
}

}  // namespace

TEST_CASE("a certain click at the top ends every task") {
    WorldSpec w = tiny_world();
    w.serp_size = 2;
    w.queries[0].docs = {"d", "e"};
    w.queries[0].intents[0].attract = {{"d", 1.0}};
    w.queries[0].intents[0].satisfy = {{"d", 1.0}};
    w.queries[0].interactions = 200;
    const auto log = generate_log(w);
    const auto interactions = sessionize(log.events, {});
    REQUIRE(interactions.size() == 200);
    for (const auto& o : interactions) {
        CHECK(o.clicks == std::vector<bool>{true, false});
        CHECK(o.q1.raw != "java");
    }
    for (const auto& t : log.truth) CHECK(t.trace.continued == 0);
}

TEST_CASE("intent frequencies follow the weights") {
    WorldSpec w = tiny_world();
    WorldIntent second = w.queries[0].intents[0];
    w.queries[0].intents[0].weight = 0.7;
    second.weight = 0.3;
    w.queries[0].intents.push_back(second);
    w.queries[0].interactions = 10000;
    const auto log = generate_log(w);
    std::size_t first = 0;
    for (const auto& t : log.truth) first += t.intent == 0;
    CHECK(std::abs(static_cast<double>(first) / 10000.0 - 0.7) <= 0.02);
}

TEST_CASE("generation is a function of the seed") {
    const WorldSpec w = random_world(small_options(4));
    const std::string a = log_text(generate_log(w));
    CHECK(a == log_text(generate_log(w)));
    WorldSpec other = w;
    other.seed += 1;
    CHECK(a != log_text(generate_log(other)));
}

TEST_CASE("generated logs sessionize back into the sampled interactions") {
    const WorldSpec w = random_world(small_options(9));
    const auto log = generate_log(w);
    SessionizeStats stats;
    const auto interactions = sessionize(log.events, {}, {}, &stats);
    CHECK(stats.malformed == 0);
    CHECK(stats.dropped_same_query == 0);
    CHECK(interactions.size() == 2 * 300 + 40);

    using Key = std::tuple<std::int64_t, std::string, std::vector<bool>>;
    std::vector<Key> from_log, from_truth;
    for (const auto& o : interactions) {
        CHECK(o.q1.raw != o.q0.raw);
        if (o.serp.doc_ids == std::vector<std::string>{"filler"}) continue;
        CHECK(o.q1_time - o.q0_time < kSessionGapSeconds);
        from_log.emplace_back(o.q0_time, o.q0.raw, o.clicks);
    }
    for (const auto& t : log.truth) {
        if (t.intent < 0) continue;
        const auto clicks = produced_clicks(t.trace);
        CHECK(trace_violation(t.trace, clicks).empty());
        from_truth.emplace_back(t.time, t.q0, clicks);
    }
    std::sort(from_log.begin(), from_log.end());
    std::sort(from_truth.begin(), from_truth.end());
    CHECK(from_log == from_truth);
}

TEST_CASE("true models are valid distributions") {
    const WorldSpec w = random_world(small_options(2));
    for (const auto& [q0, m] : true_models(w, {})) {
        CHECK_NOTHROW(check_model(m));
        CHECK(m.intents == w.queries[q0 == w.queries[0].query ? 0 : 1].intents.size());
    }
    const auto bg = true_background(w, {});
    double total = 0.0;
    for (const auto& [q, p] : bg.query_prob) total += p;
    CHECK(total == doctest::Approx(1.0));
    CHECK(true_index(w, {}).size() == w.background.size());
}

TEST_CASE("oracle on a hand-sized world") {
    const WorldSpec w = tiny_world();
    const auto q_only = oracle_rank(w, "ja", context_for("java", HistoryKind::QueryOnly), 2, false);
    REQUIRE(q_only.entries.size() == 2);
    CHECK(q_only.entries[0].query == "jazz");
    CHECK(q_only.entries[0].score == doctest::Approx(0.8125).epsilon(1e-12));
    CHECK(q_only.entries[1].score == doctest::Approx(0.1875).epsilon(1e-12));

    auto clicked = context_for("java", HistoryKind::Full);
    clicked.serp = make_serp({"d"});
    clicked.clicks = {true};
    const auto after_click = oracle_rank(w, "ja", clicked, 2, false);
    CHECK(after_click.entries[0].score == doctest::Approx(0.8125).epsilon(1e-12));

    auto skipped = clicked;
    skipped.clicks = {false};
    const auto after_skip = oracle_rank(w, "ja", skipped, 2, false);
    CHECK(after_skip.entries[0].score == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(after_skip.entries[1].score == 0.0);

    const auto div = oracle_rank(w, "ja", context_for("java", HistoryKind::QueryOnly), 2, true);
    REQUIRE(div.entries.size() == 2);
    CHECK(div.entries[1].query == "jam");
    CHECK(div.entries[1].score == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(div.step_posteriors[1].p_continue == 0.0);

    const auto none = oracle_rank(w, "ja", context_for("java", HistoryKind::None), 2, true);
    CHECK(none.entries[0].query == "jam");
    CHECK(none.entries[0].score == 0.75);
}

TEST_CASE("ranker with the generating parameters agrees with the oracle") {
    Rng rng(21);
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const WorldSpec w = random_world(small_options(seed));
        const ModelSet models = true_models(w, {});
        const BackgroundModel bg = true_background(w, {});
        const CandidateIndex index = true_index(w, {});
        for (int rep = 0; rep < 10; ++rep) {
            const WorldQuery& q = w.queries[rng.below(w.queries.size())];
            const auto& refs = q.intents[rng.below(q.intents.size())].reformulations;
            const std::string prefix = refs[rng.below(refs.size())].query.substr(0, 2);
            auto ctx = context_for(q.query, HistoryKind::Full);
            std::vector<std::string> docs = q.docs;
            rng.shuffle(std::span<std::string>(docs));
            docs.resize(3);
            ctx.serp.doc_ids = docs;
            for (int j = 0; j < 3; ++j) ctx.clicks.push_back(rng.bernoulli(0.4));
            for (Variant v : {Variant::QCntx, Variant::QCntxDiv, Variant::FCntx, Variant::FCntxDiv}) {
                auto vctx = ctx;
                if (history_of(v) == HistoryKind::QueryOnly) {
                    vctx.history = HistoryKind::QueryOnly;
                    vctx.serp = {};
                    vctx.clicks.clear();
                }
                const auto got = rank_variant(models, bg, index, prefix, ctx, v, 5);
                const auto want = oracle_rank(w, prefix, vctx, 5, is_diversified(v));
                REQUIRE(got.entries.size() == want.entries.size());
                for (std::size_t k = 0; k < got.entries.size(); ++k) {
                    CHECK(got.entries[k].query == want.entries[k].query);
                    CHECK(std::abs(got.entries[k].score - want.entries[k].score) <= 1e-9);
                }
            }
        }
    }
}

TEST_CASE("world specs round trip through JSON") {
    const WorldSpec w = random_world(small_options(5));
    std::ostringstream a;
    save_world(a, w);
    std::istringstream in(a.str());
    std::ostringstream b;
    save_world(b, load_world(in));
    CHECK(a.str() == b.str());

    std::istringstream bad_version(R"({"schema_version": 2})");
    CHECK_THROWS_AS(load_world(bad_version), FormatError);
    std::istringstream not_json("{");
    CHECK_THROWS_AS(load_world(not_json), FormatError);
}

TEST_CASE("world validation") {
    auto broken = [](auto edit) {
        WorldSpec w = tiny_world();
        edit(w);
        return w;
    };
    CHECK_NOTHROW(tiny_world().validate());
    CHECK_THROWS_AS(broken([](WorldSpec& w) { w.queries[0].intents[0].reformulations = {{"jive", 1.0}}; }).validate(),
                    InvalidArgument);
    CHECK_THROWS_AS(broken([](WorldSpec& w) { w.background[0].query = "Jam"; }).validate(), InvalidArgument);
    CHECK_THROWS_AS(broken([](WorldSpec& w) { w.serp_size = 2; }).validate(), InvalidArgument);
    CHECK_THROWS_AS(broken([](WorldSpec& w) { w.queries[0].intents[0].attract["x"] = 0.5; }).validate(),
                    InvalidArgument);
    CHECK_THROWS_AS(broken([](WorldSpec& w) {
                        w.background.push_back({"java", 1.0});
                        w.queries[0].intents[0].reformulations = {{"java", 1.0}};
                    }).validate(),
                    InvalidArgument);
    CHECK_THROWS_AS(broken([](WorldSpec& w) { w.queries[0].intents[0].satisfy["d"] = 1.5; }).validate(),
                    InvalidArgument);
}

TEST_CASE("oracle size limits") {
    WorldSpec many = tiny_world();
    for (int k = 0; k < 4; ++k) many.queries[0].intents.push_back(many.queries[0].intents[0]);
    CHECK_THROWS_AS(oracle_rank(many, "ja", context_for("java", HistoryKind::QueryOnly), 2, false), InvalidArgument);

    WorldSpec wide = tiny_world();
    for (int k = 0; k < 5; ++k) wide.queries[0].docs.push_back("e" + std::to_string(k));
    auto ctx = context_for("java", HistoryKind::Full);
    ctx.serp = make_serp({"d", "e0", "e1", "e2", "e3"});
    ctx.clicks.assign(5, false);
    CHECK_THROWS_AS(oracle_rank(wide, "ja", ctx, 2, false), InvalidArgument);
}

TEST_CASE("procedural worlds") {
    const WorldSpec w = random_world(RandomWorldOptions{});
    CHECK(w.queries.size() == 10);
    for (const auto& q : w.queries) {
        CHECK(q.intents.size() >= 2);
        CHECK(q.intents.size() <= 4);
        CHECK(q.docs.size() == 20);
    }
    RandomWorldOptions null_opts;
    null_opts.null_world = true;
    null_opts.queries = 2;
    const WorldSpec n = random_world(null_opts);
    for (const auto& [q0, m] : true_models(n, {})) CHECK(m.continue_marginal() == 0.0);
    CHECK_THROWS_AS(random_world(RandomWorldOptions{.min_intents = 3, .max_intents = 2}), InvalidArgument);
}
