#include "doctest.h"

#include <filesystem>
#include <sstream>

#include "helpers.hpp"
#include "qsuggest/corpus.hpp"
#include "qsuggest/error.hpp"
#include "qsuggest/rng.hpp"

using namespace qsuggest;
using namespace qsuggest::testing;

namespace {

LogEvent query_event(std::string user, std::int64_t t, std::string q, std::vector<std::string> serp = {"d1", "d2"}) {
    return LogEvent{std::move(user), t, EventType::Query, std::move(q), std::move(serp), {}};
}

LogEvent click_event(std::string user, std::int64_t t, std::string doc) {
    return LogEvent{std::move(user), t, EventType::Click, {}, {}, std::move(doc)};
}

}  // namespace

TEST_CASE("queries 299 s apart form one interaction") {
    const std::vector<LogEvent> events{query_event("u", 0, "apache"), click_event("u", 100, "d2"),
                                       query_event("u", 299, "apache tomcat")};
    const auto out = sessionize(events, {});
    REQUIRE(out.size() == 1);
    CHECK(out[0].q0.raw == "apache");
    CHECK(out[0].q1.raw == "apache tomcat");
    CHECK(out[0].clicks == std::vector<bool>{false, true});
    CHECK(out[0].last_click() == 1u);
}

TEST_CASE("queries 301 s apart split the session") {
    const std::vector<LogEvent> events{query_event("u", 0, "apache"), query_event("u", 301, "apache tomcat")};
    SessionizeStats stats;
    CHECK(sessionize(events, {}, {}, &stats).empty());
    CHECK(stats.sessions == 2);
}

TEST_CASE("gap is measured from the last event of any kind") {
    const std::vector<LogEvent> events{query_event("u", 0, "apache"), click_event("u", 200, "d1"),
                                       query_event("u", 450, "tomcat")};
    CHECK(sessionize(events, {}).size() == 1);
}

TEST_CASE("exactly 300 s stays in the session") {
    const std::vector<LogEvent> events{query_event("u", 0, "a"), query_event("u", 300, "b")};
    CHECK(sessionize(events, {}).size() == 1);
}

TEST_CASE("query without a follow-up yields nothing") {
    const std::vector<LogEvent> events{query_event("u", 0, "apache"), click_event("u", 10, "d1")};
    CHECK(sessionize(events, {}).empty());
}

TEST_CASE("users are sessionized independently") {
    const std::vector<LogEvent> events{query_event("u", 0, "a"), query_event("v", 1, "x"), query_event("u", 2, "b"),
                                       query_event("v", 3, "y")};
    const auto out = sessionize(events, {});
    REQUIRE(out.size() == 2);
    CHECK(out[0].q1.raw == "b");
    CHECK(out[1].q1.raw == "y");
}

TEST_CASE("bad records are counted, not fatal") {
    const std::vector<LogEvent> events{
        click_event("u", 0, "d1"),                       // orphan click
        query_event("u", 5, "a"),  click_event("u", 6, "zz"),  // foreign doc
        query_event("u", 7, "A"),                         // same query after folding
        query_event("u", 8, "b", {"d1", "d1"}),           // duplicated SERP
        query_event("u", 9, "c"),
        query_event("u", 4, "late")};                     // out of order
    SessionizeStats stats;
    const auto out = sessionize(events, {}, {}, &stats);
    CHECK(stats.malformed == 3);
    CHECK(stats.dropped_same_query == 1);
    CHECK(stats.dropped_bad_serp == 1);
    REQUIRE(out.size() == 1);
    CHECK(out[0].q0.raw == "a");
    CHECK(out[0].q1.raw == "b");
}

TEST_CASE("log lines parse and format symmetrically") {
    const auto q = parse_event("u1\t12\tQ\tApache Tomcat\td1\td2");
    REQUIRE(q);
    CHECK(q->type == EventType::Query);
    CHECK(q->query == "Apache Tomcat");
    CHECK(q->serp == std::vector<std::string>{"d1", "d2"});
    CHECK(format_event(*q) == "u1\t12\tQ\tApache Tomcat\td1\td2");
    const auto c = parse_event("u1\t13\tC\td2");
    REQUIRE(c);
    CHECK(c->doc == "d2");
    CHECK_FALSE(parse_event("u1\tnoon\tC\td2"));
    CHECK_FALSE(parse_event("u1\t13\tX\td2"));
    CHECK_FALSE(parse_event("u1\t13"));
}

TEST_CASE("read_event_log skips malformed lines") {
    std::istringstream in("u\t1\tQ\ta\td1\ngarbage\nu\t2\tQ\tb\td1\n");
    SessionizeStats stats;
    const auto events = read_event_log(in, &stats);
    CHECK(events.size() == 2);
    CHECK(stats.malformed == 1);
}

TEST_CASE("sessionize round-trips through the event format") {
    Rng rng(5);
    std::vector<Interaction> in;
    const Normalizer normalizer({"of"});
    for (int k = 0; k < 200; ++k) {
        Interaction o;
        o.q0 = normalizer.normalize("q" + std::to_string(rng.below(5)));
        o.q1 = normalizer.normalize("r" + std::to_string(rng.below(7)) + " of x");
        const std::size_t J = 1 + rng.below(10);
        for (std::size_t j = 0; j < J; ++j) {
            o.serp.doc_ids.push_back("d" + std::to_string(j));
            o.clicks.push_back(rng.bernoulli(0.3));
        }
        in.push_back(o);
    }
    const auto first = sessionize(to_events(in), normalizer);
    REQUIRE(first.size() == in.size());
    for (std::size_t k = 0; k < in.size(); ++k) {
        CHECK(first[k].q0 == in[k].q0);
        CHECK(first[k].q1 == in[k].q1);
        CHECK(first[k].serp == in[k].serp);
        CHECK(first[k].clicks == in[k].clicks);
    }
    CHECK(sessionize(to_events(first), normalizer) == first);
}

TEST_CASE("training query filter is inclusive at min_count") {
    std::vector<Interaction> list;
    const Serp serp = make_serp({"d"});
    for (int k = 0; k < 400; ++k) list.push_back(make_interaction("kept", serp, {false}, "x"));
    for (int k = 0; k < 399; ++k) list.push_back(make_interaction("dropped", serp, {false}, "x"));
    const auto kept = filter_training_queries(list, 400);
    CHECK(kept == std::set<std::string>{"kept"});
    CHECK(filter_training_queries({}, 400).empty());
}

TEST_CASE("background frequencies") {
    const Serp serp = make_serp({"d"});
    const std::vector<Interaction> list{make_interaction("a", serp, {false}, "x"),
                                        make_interaction("b", serp, {false}, "x"),
                                        make_interaction("c", serp, {false}, "y")};
    BackgroundOptions raw;
    raw.query_pseudo_count = 0.0;
    raw.term_pseudo_count = 0.0;
    const auto bg = build_background(list, raw);
    CHECK(bg.query_probability("x") == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(bg.query_probability("y") == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(bg.query_probability("a") == 0.0);
    CHECK(bg.total_interactions == 3);

    const auto terms = build_background({make_interaction("q", serp, {false}, "a b")}, raw);
    CHECK(terms.term_probability("a") == doctest::Approx(0.5));
    CHECK(terms.term_probability("b") == doctest::Approx(0.5));

    BackgroundOptions all = raw;
    all.count_all_queries = true;
    CHECK(build_background(list, all).query_probability("a") == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("smoothed background is a proper distribution") {
    Rng rng(9);
    std::vector<Interaction> list;
    const Serp serp = make_serp({"d"});
    for (int k = 0; k < 100; ++k) {
        std::string q1 = "t" + std::to_string(rng.below(30));
        if (rng.bernoulli(0.5)) q1 += " t" + std::to_string(rng.below(30));
        list.push_back(make_interaction("q" + std::to_string(k), serp, {false}, q1));
    }
    const auto bg = build_background(list);
    double qsum = 0.0;
    double tsum = 0.0;
    for (const auto& [q, p] : bg.query_prob) {
        CHECK(p > 0.0);
        qsum += p;
    }
    for (const auto& [t, p] : bg.term_prob) {
        CHECK(p > 0.0);
        tsum += p;
    }
    CHECK(std::abs(qsum - 1.0) <= 1e-9);
    CHECK(std::abs(tsum - 1.0) <= 1e-9);
    CHECK(bg.unseen_term_prob > 0.0);
    CHECK(bg.term_probability("never") == bg.unseen_term_prob);
}

TEST_CASE("background rejects empty input") {
    CHECK_THROWS_AS(build_background({}), InvalidArgument);
    const Serp serp = make_serp({"d"});
    CHECK_THROWS_AS(build_background({make_interaction("q", serp, {false}, "the", Normalizer({"the"}))}),
                    InvalidArgument);
}

TEST_CASE("candidate lookup equals a linear scan") {
    Rng rng(3);
    std::vector<Candidate> entries;
    std::set<std::string> seen;
    const Normalizer n;
    const char alphabet[] = "abcde ";
    while (entries.size() < 5000) {
        std::string text;
        const std::size_t len = 1 + rng.below(8);
        for (std::size_t k = 0; k < len; ++k) text += alphabet[rng.below(6)];
        auto q = n.normalize(text);
        if (q.raw.empty() || !seen.insert(q.raw).second) continue;
        entries.push_back({q, rng.uniform()});
    }
    const CandidateIndex index(entries);
    for (const char* prefix : {"a", "ab", "B", "abc a", "c c", "zz", "", "ac"}) {
        std::set<std::string> expected;
        const std::string folded = fold_case(prefix);
        for (const auto& e : entries) {
            if (e.query.raw.compare(0, folded.size(), folded) == 0) expected.insert(e.query.raw);
        }
        std::set<std::string> got;
        for (const Candidate* c : index.lookup(prefix)) got.insert(c->query.raw);
        CHECK(got == expected);
    }
    CHECK(index.find("zz") == nullptr);
    CHECK(index.find(entries[7].query.raw)->prior == entries[7].prior);
}

TEST_CASE("duplicate candidates are rejected") {
    const Normalizer n;
    CHECK_THROWS_AS(CandidateIndex({{n.normalize("a"), 0.5}, {n.normalize("a"), 0.5}}), InvalidArgument);
}

TEST_CASE("corpus directory round trip") {
    const Normalizer normalizer({"the"});
    Corpus corpus;
    corpus.stopwords = {"the"};
    const Serp serp = make_serp({"d1", "d2", "d3"});
    for (int k = 0; k < 20; ++k) {
        auto o = make_interaction("the q" + std::to_string(k % 3), serp, {k % 2 == 0, false, k % 5 == 0},
                                  "r" + std::to_string(k % 4), normalizer);
        o.q0_time = 1000 + k;
        o.q1_time = 1100 + k;
        for (std::size_t j = 0; j < 3; ++j) {
            if (o.clicks[j]) o.click_events.push_back({j, 1010 + k});
        }
        corpus.interactions.push_back(o);
    }
    corpus.training_queries = filter_training_queries(corpus.interactions, 5);
    corpus.background = build_background(corpus.interactions);
    corpus.index = CandidateIndex::from_background(corpus.background, normalizer);

    const auto dir = std::filesystem::temp_directory_path() / "qsuggest_corpus_test";
    std::filesystem::remove_all(dir);
    save_corpus(dir, corpus);
    const Corpus back = load_corpus(dir);
    CHECK(back.interactions == corpus.interactions);
    CHECK(back.training_queries == corpus.training_queries);
    CHECK(back.stopwords == corpus.stopwords);
    CHECK(back.background.query_prob == corpus.background.query_prob);
    CHECK(back.background.term_prob == corpus.background.term_prob);
    CHECK(back.background.unseen_term_prob == corpus.background.unseen_term_prob);
    CHECK(back.index.size() == corpus.index.size());
    std::filesystem::remove_all(dir);
}

TEST_CASE("interaction validation") {
    auto o = make_interaction("a", make_serp({"d1", "d2"}), {true}, "b");
    CHECK_THROWS_AS(validate(o), InvalidArgument);
    o.clicks = {true, false};
    CHECK_NOTHROW(validate(o));
    o.serp = make_serp({"d1", "d1"});
    CHECK_THROWS_AS(validate(o), InvalidArgument);
}

TEST_CASE("versioned files reject a wrong header") {
    std::istringstream in("#something-else v1\n");
    CHECK_THROWS_AS(read_background(in), FormatError);
}
