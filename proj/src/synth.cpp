#include "qsuggest/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "json.hpp"

#include "qsuggest/error.hpp"

namespace qsuggest {

using nlohmann::ordered_json;

namespace {

constexpr int kWorldSchema = 1;
constexpr double kTermFloor = 1e-9;

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

double total_weight(const std::vector<WeightedQuery>& list) {
    double total = 0.0;
    for (const auto& w : list) total += w.weight;
    return total;
}

void check_weights(const std::vector<WeightedQuery>& list, const std::string& where) {
    if (list.empty()) throw InvalidArgument(where + ": empty query distribution");
    std::set<std::string> seen;
    for (const auto& w : list) {
        if (!(w.weight > 0.0) || !std::isfinite(w.weight)) throw InvalidArgument(where + ": weights must be positive");
        if (fold_case(w.query) != w.query || w.query.empty()) {
            throw InvalidArgument(where + ": queries must be nonempty and lower case: '" + w.query + "'");
        }
        if (!seen.insert(w.query).second) throw InvalidArgument(where + ": duplicate query '" + w.query + "'");
    }
}

}  // namespace

void WorldSpec::validate() const {
    if (serp_size == 0) throw InvalidArgument("serp_size must be positive");
    check_weights(background, "background");
    std::set<std::string> pool;
    for (const auto& w : background) pool.insert(w.query);
    std::set<std::string> seen;
    for (const auto& q : queries) {
        const std::string where = "query '" + q.query + "'";
        if (q.query.empty() || fold_case(q.query) != q.query) throw InvalidArgument(where + ": must be lower case");
        if (!seen.insert(q.query).second) throw InvalidArgument(where + ": listed twice");
        if (q.docs.size() < serp_size) throw InvalidArgument(where + ": fewer docs than serp_size");
        if (std::set<std::string>(q.docs.begin(), q.docs.end()).size() != q.docs.size()) {
            throw InvalidArgument(where + ": duplicate doc");
        }
        if (q.intents.empty()) throw InvalidArgument(where + ": no intents");
        if (pool.size() == 1 && pool.contains(q.query)) throw InvalidArgument(where + ": background has no other query");
        for (const auto& intent : q.intents) {
            if (!(intent.weight > 0.0)) throw InvalidArgument(where + ": intent weights must be positive");
            if (!is_probability(intent.default_attract) || !is_probability(intent.default_satisfy)) {
                throw InvalidArgument(where + ": default attract/satisfy outside [0,1]");
            }
            for (const auto* table : {&intent.attract, &intent.satisfy}) {
                for (const auto& [doc, p] : *table) {
                    if (!is_probability(p)) throw InvalidArgument(where + ": probability outside [0,1] for " + doc);
                    if (std::find(q.docs.begin(), q.docs.end(), doc) == q.docs.end()) {
                        throw InvalidArgument(where + ": profile names unknown doc " + doc);
                    }
                }
            }
            check_weights(intent.reformulations, where + " reformulations");
            for (const auto& r : intent.reformulations) {
                if (r.query == q.query) throw InvalidArgument(where + ": reformulation equals the query");
                if (!pool.contains(r.query)) {
                    throw InvalidArgument(where + ": reformulation '" + r.query + "' missing from background");
                }
            }
        }
    }
}

namespace {

std::vector<WeightedQuery> weighted_from_json(const ordered_json& j) {
    std::vector<WeightedQuery> out;
    for (const auto& e : j) out.push_back({e.at("query").get<std::string>(), e.at("weight").get<double>()});
    return out;
}

ordered_json weighted_to_json(const std::vector<WeightedQuery>& list) {
    ordered_json out = ordered_json::array();
    for (const auto& w : list) out.push_back({{"query", w.query}, {"weight", w.weight}});
    return out;
}

}  // namespace

WorldSpec load_world(std::istream& in) {
    WorldSpec world;
    try {
        const ordered_json j = ordered_json::parse(in);
        if (j.at("schema_version").get<int>() != kWorldSchema) throw FormatError("unsupported world schema version");
        world.seed = j.at("seed").get<std::uint64_t>();
        world.serp_size = j.at("serp_size").get<std::size_t>();
        world.filler_sessions = j.value("filler_sessions", std::size_t{0});
        world.background = weighted_from_json(j.at("background"));
        for (const auto& jq : j.at("queries")) {
            WorldQuery q;
            q.query = jq.at("query").get<std::string>();
            q.interactions = jq.at("interactions").get<std::size_t>();
            q.docs = jq.at("docs").get<std::vector<std::string>>();
            q.shuffle_serp = jq.value("shuffle_serp", false);
            for (const auto& ji : jq.at("intents")) {
                WorldIntent intent;
                intent.weight = ji.at("weight").get<double>();
                intent.attract = ji.value("attract", std::map<std::string, double>{});
                intent.satisfy = ji.value("satisfy", std::map<std::string, double>{});
                intent.default_attract = ji.value("default_attract", intent.default_attract);
                intent.default_satisfy = ji.value("default_satisfy", intent.default_satisfy);
                intent.reformulations = weighted_from_json(ji.at("reformulations"));
                q.intents.push_back(std::move(intent));
            }
            world.queries.push_back(std::move(q));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("world spec: ") + e.what());
    }
    world.validate();
    return world;
}

WorldSpec load_world(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return load_world(in);
}

void save_world(std::ostream& out, const WorldSpec& world) {
    ordered_json j;
    j["schema_version"] = kWorldSchema;
    j["seed"] = world.seed;
    j["serp_size"] = world.serp_size;
    j["filler_sessions"] = world.filler_sessions;
    j["background"] = weighted_to_json(world.background);
    j["queries"] = ordered_json::array();
    for (const auto& q : world.queries) {
        ordered_json jq;
        jq["query"] = q.query;
        jq["interactions"] = q.interactions;
        jq["docs"] = q.docs;
        jq["shuffle_serp"] = q.shuffle_serp;
        jq["intents"] = ordered_json::array();
        for (const auto& intent : q.intents) {
            jq["intents"].push_back({{"weight", intent.weight},
                                     {"attract", intent.attract},
                                     {"satisfy", intent.satisfy},
                                     {"default_attract", intent.default_attract},
                                     {"default_satisfy", intent.default_satisfy},
                                     {"reformulations", weighted_to_json(intent.reformulations)}});
        }
        j["queries"].push_back(std::move(jq));
    }
    out << j.dump(1) << '\n';
}

// ---------------------------------------------------------------------------

namespace {

/// Term distribution induced by drawing a query from `list` and emitting its terms.
std::map<std::string, double> induced_terms(const std::vector<WeightedQuery>& list, const Normalizer& normalizer) {
    std::map<std::string, double> lm;
    double total = 0.0;
    for (const auto& w : list) {
        for (const auto& t : normalizer.normalize(w.query).terms) {
            lm[t] += w.weight;
            total += w.weight;
        }
    }
    if (total > 0.0) {
        for (auto& [t, p] : lm) p /= total;
    }
    return lm;
}

Serp canonical_serp(const WorldSpec& world, const WorldQuery& query) {
    return Serp{std::vector<std::string>(query.docs.begin(),
                                         query.docs.begin() + static_cast<std::ptrdiff_t>(world.serp_size))};
}

}  // namespace

BackgroundModel true_background(const WorldSpec& world, const Normalizer& normalizer) {
    BackgroundModel bg;
    const double total = total_weight(world.background);
    for (const auto& w : world.background) bg.query_prob[normalizer.normalize(w.query).raw] = w.weight / total;
    bg.term_prob = induced_terms(world.background, normalizer);
    bg.unseen_term_prob = kTermFloor;
    for (const auto& q : world.queries) bg.total_interactions += q.interactions;
    return bg;
}

IntentMixtureModel true_model(const WorldSpec& world, const WorldQuery& query, const Normalizer& normalizer) {
    IntentMixtureModel m;
    m.q0 = normalizer.normalize(query.query);
    m.intents = query.intents.size();
    m.state_prior.assign(2 * m.intents, 0.0);
    m.intent_lm.resize(m.intents);
    m.lm_floor.assign(m.intents, kTermFloor);
    m.reformulation.resize(m.intents);

    double weight_total = 0.0;
    for (const auto& intent : query.intents) weight_total += intent.weight;

    const Serp serp = canonical_serp(world, query);
    for (const auto& doc : query.docs) {
        m.attract[doc].assign(m.intents, 0.0);
        m.satisfy[doc].assign(m.intents, 0.0);
    }
    for (std::size_t i = 0; i < m.intents; ++i) {
        const auto& intent = query.intents[i];
        for (const auto& doc : query.docs) {
            const auto a = intent.attract.find(doc);
            const auto s = intent.satisfy.find(doc);
            m.attract[doc][i] = a == intent.attract.end() ? intent.default_attract : a->second;
            m.satisfy[doc][i] = s == intent.satisfy.end() ? intent.default_satisfy : s->second;
        }
        double p_continue = 1.0;
        for (const auto& doc : serp.doc_ids) p_continue *= 1.0 - m.attract[doc][i] * m.satisfy[doc][i];
        const double w = intent.weight / weight_total;
        m.state_prior[IntentMixtureModel::state(1, i, m.intents)] = w * p_continue;
        m.state_prior[IntentMixtureModel::state(0, i, m.intents)] = w * (1.0 - p_continue);

        const double total = total_weight(intent.reformulations);
        for (const auto& r : intent.reformulations) {
            m.reformulation[i][normalizer.normalize(r.query).raw] = r.weight / total;
        }
        m.intent_lm[i] = induced_terms(intent.reformulations, normalizer);
        if (m.intent_lm[i].empty()) m.intent_lm[i][""] = 1.0;
    }
    return m;
}

ModelSet true_models(const WorldSpec& world, const Normalizer& normalizer) {
    ModelSet models;
    for (const auto& q : world.queries) {
        auto m = true_model(world, q, normalizer);
        models.emplace(m.q0.raw, std::move(m));
    }
    return models;
}

CandidateIndex true_index(const WorldSpec& world, const Normalizer& normalizer) {
    return CandidateIndex::from_background(true_background(world, normalizer), normalizer);
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::int64_t kClickSpacing = 20;
constexpr std::int64_t kReformulationDelay = 30;
constexpr std::int64_t kMinSessionGap = kSessionGapSeconds + 1;
constexpr std::int64_t kEpoch = 1'600'000'000;

struct Job {
    int query = -1;  // world query index, -1 for filler
    std::size_t ordinal = 0;
};

}  // namespace

SyntheticLog generate_log(const WorldSpec& world, const Normalizer& normalizer) {
    world.validate();
    const BackgroundModel bg = true_background(world, normalizer);

    std::vector<IntentMixtureModel> models;
    std::vector<ReformulationVocab> vocabs;
    std::vector<Rng> query_rngs;
    for (const auto& q : world.queries) {
        models.push_back(true_model(world, q, normalizer));
        vocabs.push_back(build_reformulation_vocab(models.back(), bg, normalizer));
        query_rngs.emplace_back(derive_seed(world.seed, "query:" + q.query));
    }

    std::vector<Job> jobs;
    for (std::size_t q = 0; q < world.queries.size(); ++q) {
        for (std::size_t k = 0; k < world.queries[q].interactions; ++k) jobs.push_back({static_cast<int>(q), k});
    }
    for (std::size_t k = 0; k < world.filler_sessions; ++k) jobs.push_back({-1, k});

    Rng rng(derive_seed(world.seed, "schedule"));
    rng.shuffle(std::span<Job>(jobs));

    std::vector<double> bg_weights;
    std::vector<std::string> bg_queries;
    for (const auto& w : world.background) {
        bg_queries.push_back(normalizer.normalize(w.query).raw);
        bg_weights.push_back(w.weight);
    }

    const std::size_t users = std::max<std::size_t>(1, jobs.size() / 20);
    std::vector<std::int64_t> clock(users);
    for (auto& t : clock) t = kEpoch + static_cast<std::int64_t>(rng.below(3600));

    // (time, generation order) keeps each user's events in order after the merge.
    std::vector<std::pair<std::int64_t, LogEvent>> stamped;
    SyntheticLog log;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        const Job& job = jobs[k];
        const std::size_t u = k % users;
        const std::string user = "u" + std::to_string(u);
        std::int64_t t = clock[u];

        if (job.query < 0) {
            const std::size_t a = rng.categorical(bg_weights);
            std::size_t b = a;
            if (bg_queries.size() > 1) {
                while (b == a) b = rng.categorical(bg_weights);
            }
            stamped.push_back({t, LogEvent{user, t, EventType::Query, bg_queries[a], {"filler"}, {}}});
            t += kReformulationDelay;
            stamped.push_back({t, LogEvent{user, t, EventType::Query, bg_queries[b], {}, {}}});
            log.truth.push_back({user, clock[u], bg_queries[a], -1, {}});
        } else {
            const auto q = static_cast<std::size_t>(job.query);
            const WorldQuery& wq = world.queries[q];
            Rng& qrng = query_rngs[q];
            std::vector<std::string> docs = wq.docs;
            if (wq.shuffle_serp) qrng.shuffle(std::span<std::string>(docs));
            docs.resize(world.serp_size);
            auto [o, trace] = sample_interaction(models[q], Serp{docs}, vocabs[q], qrng);
            stamped.push_back({t, LogEvent{user, t, EventType::Query, o.q0.raw, docs, {}}});
            std::int64_t last = t;
            std::int64_t n = 0;
            for (std::size_t j = 0; j < o.clicks.size(); ++j) {
                if (!o.clicks[j]) continue;
                last = t + kClickSpacing * ++n;
                stamped.push_back({last, LogEvent{user, last, EventType::Click, {}, {}, docs[j]}});
            }
            last += kReformulationDelay;
            stamped.push_back({last, LogEvent{user, last, EventType::Query, o.q1.raw, {}, {}}});
            t = last;
            log.truth.push_back({user, clock[u], wq.query, static_cast<int>(trace.intent), std::move(trace)});
        }
        clock[u] = t + kMinSessionGap + static_cast<std::int64_t>(rng.below(600));
    }

    std::stable_sort(stamped.begin(), stamped.end(),
                     [](const auto& x, const auto& y) { return x.first < y.first; });
    log.events.reserve(stamped.size());
    for (auto& [t, e] : stamped) log.events.push_back(std::move(e));
    return log;
}

void write_event_log(std::ostream& out, const std::vector<LogEvent>& events) {
    for (const auto& e : events) out << format_event(e) << '\n';
}

namespace {

std::string bits(const std::vector<bool>& v) {
    std::string s;
    for (bool b : v) s += b ? '1' : '0';
    return s;
}

}  // namespace

void write_truth(std::ostream& out, const std::vector<TruthRecord>& truth) {
    out << "#qsuggest-truth v1\n";
    out << "user\ttime\tq0\tintent\tcontinued\texamined\tattracted\tsatisfied\tnew_query\n";
    for (const auto& r : truth) {
        out << r.user << '\t' << r.time << '\t' << r.q0 << '\t' << r.intent << '\t';
        if (r.intent < 0) {
            out << "-\t-\t-\t-\t-\n";
            continue;
        }
        out << r.trace.continued << '\t' << bits(r.trace.examined) << '\t' << bits(r.trace.attracted) << '\t'
            << bits(r.trace.satisfied) << '\t' << bits(r.trace.new_query) << '\n';
    }
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kOracleMaxIntents = 4;
constexpr std::size_t kOracleMaxCandidates = 50;
constexpr std::size_t kOracleMaxSerp = 4;

/// P(H, c | i) by summing over every latent (attracted, satisfied) vector.
double enumerate_click_probability(const WorldQuery& query, std::size_t intent, const Serp& serp,
                                   const std::vector<bool>& clicks, int c) {
    const WorldIntent& wi = query.intents[intent];
    auto lookup = [](const std::map<std::string, double>& table, const std::string& doc, double fallback) {
        const auto it = table.find(doc);
        return it == table.end() ? fallback : it->second;
    };
    const std::size_t J = serp.size();
    double total = 0.0;
    for (unsigned attracted = 0; attracted < (1u << J); ++attracted) {
        for (unsigned satisfied = 0; satisfied < (1u << J); ++satisfied) {
            double p = 1.0;
            for (std::size_t j = 0; j < J && p > 0.0; ++j) {
                const bool aj = (attracted >> j) & 1u;
                const bool sj = (satisfied >> j) & 1u;
                const double a = lookup(wi.attract, serp.doc_ids[j], wi.default_attract);
                const double s = lookup(wi.satisfy, serp.doc_ids[j], wi.default_satisfy);
                p *= aj ? a : 1.0 - a;
                if (aj) {
                    p *= sj ? s : 1.0 - s;
                } else if (sj) {
                    p = 0.0;  // satisfaction needs a click
                }
            }
            if (p == 0.0) continue;
            std::vector<bool> produced(J, false);
            int continued = 1;
            for (std::size_t j = 0; j < J; ++j) {
                if ((attracted >> j) & 1u) {
                    produced[j] = true;
                    if ((satisfied >> j) & 1u) {
                        continued = 0;
                        break;
                    }
                }
            }
            if (continued == c && produced == clicks) total += p;
        }
    }
    return total;
}

}  // namespace

RankedSuggestions oracle_rank(const WorldSpec& world, std::string_view prefix, const SuggestionContext& context,
                              std::size_t n, bool diversify, const Normalizer& normalizer) {
    if (prefix.empty()) throw InvalidArgument("prefix must be nonempty");
    context.validate();
    if (world.background.size() > kOracleMaxCandidates) throw InvalidArgument("oracle: too many candidates");

    const BackgroundModel bg = true_background(world, normalizer);
    const CandidateIndex index = CandidateIndex::from_background(bg, normalizer);

    const WorldQuery* query = nullptr;
    if (context.history != HistoryKind::None) {
        for (const auto& q : world.queries) {
            if (normalizer.normalize(q.query).raw == context.q0.raw) query = &q;
        }
    }
    if (!query) return baseline_rank(index, prefix, n, index.size());
    if (query->intents.size() > kOracleMaxIntents) throw InvalidArgument("oracle: too many intents");
    if (context.history == HistoryKind::Full && context.serp.size() > kOracleMaxSerp) {
        throw InvalidArgument("oracle: SERP too long");
    }

    const std::size_t m = query->intents.size();
    double weight_total = 0.0;
    for (const auto& intent : query->intents) weight_total += intent.weight;

    // P(c, i) from the canonical-SERP continuation probability, by enumeration as well.
    const Serp canonical = canonical_serp(world, *query);
    std::vector<double> state_prior(2 * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double p_stop = 0.0;
        double p_continue = 0.0;
        const std::size_t J = canonical.size();
        // Sum over every click pattern of the canonical SERP.
        for (unsigned pattern = 0; pattern < (1u << J); ++pattern) {
            std::vector<bool> clicks(J);
            for (std::size_t j = 0; j < J; ++j) clicks[j] = (pattern >> j) & 1u;
            if (J <= kOracleMaxSerp) {
                p_stop += enumerate_click_probability(*query, i, canonical, clicks, 0);
                p_continue += enumerate_click_probability(*query, i, canonical, clicks, 1);
            }
        }
        if (J > kOracleMaxSerp) {
            // Long canonical pages: closed form for the prior only.
            const IntentMixtureModel tm = true_model(world, *query, normalizer);
            p_continue = tm.prior(1, i) / (tm.intent_marginal(i));
            p_stop = 1.0 - p_continue;
        }
        const double w = query->intents[i].weight / weight_total;
        state_prior[IntentMixtureModel::state(0, i, m)] = w * p_stop / (p_stop + p_continue);
        state_prior[IntentMixtureModel::state(1, i, m)] = w * p_continue / (p_stop + p_continue);
    }

    std::vector<std::map<std::string, double>> reform(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double total = total_weight(query->intents[i].reformulations);
        for (const auto& r : query->intents[i].reformulations) {
            reform[i][normalizer.normalize(r.query).raw] = r.weight / total;
        }
    }
    auto p_query = [&](const std::string& q, int c, std::size_t i) {
        if (c == 0) return bg.query_probability(q);
        const auto it = reform[i].find(q);
        return it == reform[i].end() ? 0.0 : it->second;
    };

    std::vector<double> history(2 * m, 1.0);
    if (context.history == HistoryKind::Full) {
        for (int c = 0; c <= 1; ++c) {
            for (std::size_t i = 0; i < m; ++i) {
                history[IntentMixtureModel::state(c, i, m)] =
                    enumerate_click_probability(*query, i, context.serp, context.clicks, c);
            }
        }
    }

    std::vector<std::string> shown = context.shown;
    std::set<std::string> excluded(shown.begin(), shown.end());
    std::vector<const Candidate*> remaining;
    for (const Candidate* c : index.lookup(prefix)) {
        if (!excluded.contains(c->query.raw)) remaining.push_back(c);
    }
    if (remaining.size() > kOracleMaxCandidates) throw InvalidArgument("oracle: too many candidates");

    auto posterior = [&] {
        std::vector<double> joint(2 * m, 0.0);
        for (int c = 0; c <= 1; ++c) {
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t k = IntentMixtureModel::state(c, i, m);
                double p = state_prior[k] * history[k];
                for (const auto& r : shown) p *= 1.0 - p_query(r, c, i);
                joint[k] = p;
            }
        }
        const double evidence = std::accumulate(joint.begin(), joint.end(), 0.0);
        if (!(evidence > 0.0)) throw Error("oracle: context has zero probability");
        for (double& p : joint) p /= evidence;
        return joint;
    };
    auto summarize = [&](const std::vector<double>& joint) {
        ContextPosterior post;
        post.intent_dist.assign(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) post.p_continue += joint[IntentMixtureModel::state(1, i, m)];
        if (post.p_continue > 0.0) {
            for (std::size_t i = 0; i < m; ++i) {
                post.intent_dist[i] = joint[IntentMixtureModel::state(1, i, m)] / post.p_continue;
            }
        }
        return post;
    };
    auto score = [&](const std::vector<double>& joint, const std::string& q) {
        double s = 0.0;
        for (int c = 0; c <= 1; ++c) {
            for (std::size_t i = 0; i < m; ++i) s += joint[IntentMixtureModel::state(c, i, m)] * p_query(q, c, i);
        }
        return s;
    };

    RankedSuggestions out;
    out.pool = remaining;
    const std::size_t steps = diversify ? n : 1;
    std::vector<double> joint = posterior();
    if (!diversify) {
        std::vector<std::pair<double, const Candidate*>> scored;
        for (const Candidate* c : remaining) scored.emplace_back(score(joint, c->query.raw), c);
        std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
            return ranks_before(x.first, x.second->query.raw, y.first, y.second->query.raw);
        });
        out.step_posteriors.push_back(summarize(joint));
        for (std::size_t k = 0; k < scored.size() && k < n; ++k) {
            out.entries.push_back({scored[k].second->query.raw, scored[k].first});
        }
        return out;
    }
    for (std::size_t k = 0; k < steps && !remaining.empty(); ++k) {
        if (k > 0) joint = posterior();
        std::size_t best = 0;
        double best_score = score(joint, remaining[0]->query.raw);
        for (std::size_t r = 1; r < remaining.size(); ++r) {
            const double s = score(joint, remaining[r]->query.raw);
            if (ranks_before(s, remaining[r]->query.raw, best_score, remaining[best]->query.raw)) {
                best = r;
                best_score = s;
            }
        }
        out.step_posteriors.push_back(summarize(joint));
        out.entries.push_back({remaining[best]->query.raw, best_score});
        shown.push_back(remaining[best]->query.raw);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr", "st"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u"};

class TokenSource {
public:
    explicit TokenSource(Rng& rng) : rng_(rng) {}

    std::string next() {
        for (;;) {
            std::string t;
            const std::size_t syllables = 2 + rng_.below(2);
            for (std::size_t s = 0; s < syllables; ++s) {
                t += kOnsets[rng_.below(std::size(kOnsets))];
                t += kVowels[rng_.below(std::size(kVowels))];
            }
            if (used_.insert(t).second) return t;
        }
    }

private:
    Rng& rng_;
    std::set<std::string> used_;
};

double between(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

}  // namespace

WorldSpec random_world(const RandomWorldOptions& o) {
    if (o.queries == 0 || o.min_intents == 0 || o.max_intents < o.min_intents) {
        throw InvalidArgument("random world: bad query or intent counts");
    }
    if (o.docs_per_query < o.serp_size || o.serp_size == 0) throw InvalidArgument("random world: bad doc counts");
    if (o.reformulations_per_intent == 0) throw InvalidArgument("random world: intents need reformulations");

    Rng rng(o.seed);
    TokenSource tokens(rng);
    WorldSpec world;
    world.seed = derive_seed(o.seed, "world");
    world.serp_size = o.serp_size;
    world.filler_sessions = o.filler_sessions;

    std::vector<std::string> vocab;
    for (std::size_t k = 0; k < o.vocab; ++k) vocab.push_back(tokens.next());

    std::set<std::string> in_background;
    auto add_background = [&](const std::string& q, double w) {
        if (in_background.insert(q).second) world.background.push_back({q, w});
    };

    std::size_t cursor = 0;
    auto word = [&] { return vocab[cursor++ % vocab.size()]; };

    for (std::size_t qi = 0; qi < o.queries; ++qi) {
        WorldQuery q;
        q.query = tokens.next();
        q.interactions = o.interactions_per_query;
        q.shuffle_serp = o.shuffle_serp;
        for (std::size_t d = 0; d < o.docs_per_query; ++d) q.docs.push_back(q.query + "-d" + std::to_string(d));
        const std::size_t m = o.min_intents + rng.below(o.max_intents - o.min_intents + 1);
        for (std::size_t i = 0; i < m; ++i) {
            WorldIntent intent;
            intent.weight = between(rng, 0.5, 1.5);
            for (std::size_t d = 0; d < q.docs.size(); ++d) {
                const bool own = d % m == i;
                if (o.null_world) {
                    intent.attract[q.docs[d]] = 1.0;
                    intent.satisfy[q.docs[d]] = 1.0;
                } else {
                    intent.attract[q.docs[d]] = own ? between(rng, 0.5, 0.9) : between(rng, 0.02, 0.1);
                    intent.satisfy[q.docs[d]] = own ? between(rng, 0.05, 0.3) : between(rng, 0.3, 0.7);
                }
            }
            if (!o.null_world) {
                const std::string topic = word();
                for (std::size_t r = 0; r < o.reformulations_per_intent; ++r) {
                    std::string text;
                    switch (r % 3) {
                        case 0: text = q.query + " " + topic + (r ? " " + word() : ""); break;
                        case 1: text = topic + " " + word(); break;
                        default: text = word(); break;
                    }
                    if (in_background.contains(text)) continue;
                    const double w = between(rng, 0.5, 2.0);
                    intent.reformulations.push_back({text, w});
                    add_background(text, between(rng, 0.5, 2.0));
                    // Competitors share the first three characters.
                    const std::string stem = text.substr(0, text.find(' '));
                    for (std::size_t k = 0; k < o.competitors_per_prefix; ++k) {
                        add_background(stem + " " + tokens.next(), between(rng, 1.0, 6.0));
                    }
                }
            }
            q.intents.push_back(std::move(intent));
        }
        world.queries.push_back(std::move(q));
    }
    for (std::size_t k = 0; k < o.extra_background; ++k) add_background(word() + " " + word(), between(rng, 0.5, 3.0));
    if (o.null_world) {
        for (auto& q : world.queries) {
            for (auto& intent : q.intents) {
                for (const auto& b : world.background) {
                    if (b.query != q.query) intent.reformulations.push_back(b);
                }
            }
        }
    }
    world.validate();
    return world;
}

}  // namespace qsuggest
