#include "qsuggest/user_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qsuggest/error.hpp"

namespace qsuggest {

double IntentMixtureModel::continue_marginal() const {
    double total = 0.0;
    for (std::size_t i = 0; i < intents; ++i) total += prior(1, i);
    return total;
}

double IntentMixtureModel::attractiveness(std::string_view doc, std::size_t intent) const {
    const auto it = attract.find(std::string(doc));
    return it == attract.end() ? default_attract : it->second[intent];
}

double IntentMixtureModel::satisfaction(std::string_view doc, std::size_t intent) const {
    const auto it = satisfy.find(std::string(doc));
    return it == satisfy.end() ? default_satisfy : it->second[intent];
}

double IntentMixtureModel::term_probability(std::string_view term, std::size_t intent) const {
    const auto& lm = intent_lm[intent];
    const auto it = lm.find(std::string(term));
    return it == lm.end() ? lm_floor[intent] : it->second;
}

double IntentMixtureModel::reformulation_probability(std::string_view q1, std::size_t intent) const {
    const auto& table = reformulation[intent];
    const auto it = table.find(std::string(q1));
    return it == table.end() ? 0.0 : it->second;
}

void check_model(const IntentMixtureModel& m, double tol, bool require_interior) {
    auto fail = [&](const std::string& what) {
        throw InvalidArgument("model '" + m.q0.raw + "': " + what);
    };
    if (m.intents == 0) fail("no intents");
    if (m.state_prior.size() != 2 * m.intents) fail("state prior size mismatch");
    if (m.intent_lm.size() != m.intents || m.lm_floor.size() != m.intents || m.reformulation.size() != m.intents) {
        fail("per-intent table count mismatch");
    }
    double total = 0.0;
    for (double p : m.state_prior) {
        if (!(p >= 0.0 && p <= 1.0)) fail("state prior outside [0,1]");
        total += p;
    }
    if (std::abs(total - 1.0) > tol) fail("state prior sums to " + format_double(total));
    auto check_unit = [&](const auto& table, const char* name) {
        for (const auto& [doc, values] : table) {
            if (values.size() != m.intents) fail(std::string(name) + " arity mismatch for " + doc);
            for (double v : values) {
                const bool ok = require_interior ? (v > 0.0 && v < 1.0) : (v >= 0.0 && v <= 1.0);
                if (!ok) fail(std::string(name) + " out of range for " + doc);
            }
        }
    };
    check_unit(m.attract, "attract");
    check_unit(m.satisfy, "satisfy");
    for (std::size_t i = 0; i < m.intents; ++i) {
        double lm_total = 0.0;
        for (const auto& [t, p] : m.intent_lm[i]) {
            if (!(p > 0.0)) fail("non-positive LM entry");
            lm_total += p;
        }
        if (std::abs(lm_total - 1.0) > tol) fail("intent LM " + std::to_string(i) + " sums to " + format_double(lm_total));
        double table_total = 0.0;
        for (const auto& [q, p] : m.reformulation[i]) {
            if (!(p >= 0.0)) fail("negative reformulation probability");
            table_total += p;
        }
        if (table_total > 1.0 + tol) fail("reformulation table sums to " + format_double(table_total));
    }
}

std::string trace_violation(const LatentTrace& t, const std::vector<bool>& clicks) {
    const std::size_t J = clicks.size();
    if (t.examined.size() != J || t.attracted.size() != J || t.satisfied.size() != J || t.new_query.size() != J) {
        return "trace length mismatch";
    }
    if (J == 0) return "empty SERP";
    if (!t.examined[0]) return "first document not examined";
    bool any_satisfied = false;
    std::size_t query_points = 0;
    for (std::size_t j = 0; j < J; ++j) {
        if (j + 1 < J && !t.examined[j] && t.examined[j + 1]) return "examination not monotone";
        const bool click = t.examined[j] && t.attracted[j];
        if (click != clicks[j]) return "click does not equal examined and attracted at " + std::to_string(j);
        if (t.satisfied[j] && !clicks[j]) return "satisfied without click at " + std::to_string(j);
        if (t.satisfied[j]) {
            any_satisfied = true;
            if (j + 1 < J && t.examined[j + 1]) return "examination continued after satisfaction";
            if (t.continued != 0) return "satisfied but task continued";
            if (!t.new_query[j]) return "satisfied without new query";
        } else if (t.examined[j] && j + 1 < J) {
            if (!t.examined[j + 1]) return "examination stopped without satisfaction";
            if (t.new_query[j]) return "new query before satisfaction";
        }
        if (t.new_query[j]) ++query_points;
    }
    if (!any_satisfied) {
        if (t.continued != 1) return "no satisfaction but task not continued";
        if (!t.new_query[J - 1]) return "no new query after exhausting the page";
    }
    if (query_points != 1) return "exactly one new-query point expected";
    return {};
}

double log_sum_exp(const std::vector<double>& values) {
    double peak = kNegInf;
    for (double v : values) peak = std::max(peak, v);
    if (peak == kNegInf) return kNegInf;
    double total = 0.0;
    for (double v : values) total += std::exp(v - peak);
    return peak + std::log(total);
}

double click_loglik(const IntentMixtureModel& model, const Serp& serp, const std::vector<bool>& clicks, int c,
                    std::size_t intent) {
    if (clicks.size() != serp.size() || serp.size() == 0) {
        throw InvalidArgument("click vector length must equal a nonempty SERP length");
    }
    if (c != 0 && c != 1) throw InvalidArgument("continuation flag must be 0 or 1");
    std::size_t end = serp.size();
    if (c == 0) {
        std::size_t last = serp.size();
        for (std::size_t j = serp.size(); j-- > 0;) {
            if (clicks[j]) {
                last = j;
                break;
            }
        }
        if (last == serp.size()) return kNegInf;
        end = last;
    }
    double ll = 0.0;
    for (std::size_t j = 0; j < end; ++j) {
        const double a = model.attractiveness(serp.doc_ids[j], intent);
        if (clicks[j]) {
            ll += std::log(a) + std::log1p(-model.satisfaction(serp.doc_ids[j], intent));
        } else {
            ll += std::log1p(-a);
        }
    }
    if (c == 0) {
        ll += std::log(model.attractiveness(serp.doc_ids[end], intent)) +
              std::log(model.satisfaction(serp.doc_ids[end], intent));
    }
    return ll;
}

double click_loglik(const IntentMixtureModel& model, const Interaction& interaction, int c, std::size_t intent) {
    return click_loglik(model, interaction.serp, interaction.clicks, c, intent);
}

double query_loglik(const IntentMixtureModel& model, const BackgroundModel& background, const QueryText& q1, int c,
                    std::size_t intent) {
    double ll = 0.0;
    for (const auto& term : q1.terms) {
        ll += std::log(c == 0 ? background.term_probability(term) : model.term_probability(term, intent));
    }
    return ll;
}

std::vector<double> state_log_joint(const IntentMixtureModel& model, const BackgroundModel& background,
                                    const Interaction& interaction) {
    std::vector<double> out(2 * model.intents, kNegInf);
    for (int c = 0; c <= 1; ++c) {
        for (std::size_t i = 0; i < model.intents; ++i) {
            const double prior = model.prior(c, i);
            if (prior <= 0.0) continue;
            const double cl = click_loglik(model, interaction, c, i);
            if (cl == kNegInf) continue;
            out[IntentMixtureModel::state(c, i, model.intents)] =
                cl + query_loglik(model, background, interaction.q1, c, i) + std::log(prior);
        }
    }
    return out;
}

StatePosterior responsibilities(const IntentMixtureModel& model, const BackgroundModel& background,
                                const Interaction& interaction, double beta) {
    if (!(beta > 0.0 && beta <= 1.0)) throw InvalidArgument("temperature must lie in (0, 1]");
    std::vector<double> joint = state_log_joint(model, background, interaction);
    for (double& v : joint) v *= beta;
    const double norm = log_sum_exp(joint);
    if (norm == kNegInf) throw Error("interaction has zero probability under every state");
    StatePosterior post{model.intents, std::vector<double>(joint.size())};
    for (std::size_t k = 0; k < joint.size(); ++k) post.gamma[k] = std::exp(joint[k] - norm);
    return post;
}

// ---------------------------------------------------------------------------

namespace {

void add_entry(ReformulationVocab::Table& table, QueryText query, double weight) {
    if (weight <= 0.0) return;
    const double prev = table.cumulative.empty() ? 0.0 : table.cumulative.back();
    table.queries.push_back(std::move(query));
    table.cumulative.push_back(prev + weight);
}

const QueryText& draw(const ReformulationVocab::Table& table, Rng& rng) {
    const double u = rng.uniform() * table.cumulative.back();
    auto it = std::upper_bound(table.cumulative.begin(), table.cumulative.end(), u);
    if (it == table.cumulative.end()) --it;
    return table.queries[static_cast<std::size_t>(it - table.cumulative.begin())];
}

}  // namespace

ReformulationVocab build_reformulation_vocab(const IntentMixtureModel& model, const BackgroundModel& background,
                                             const Normalizer& normalizer) {
    ReformulationVocab vocab;
    for (const auto& [q, p] : background.query_prob) {
        if (q != model.q0.raw) add_entry(vocab.background, normalizer.normalize(q), p);
    }
    if (vocab.background.queries.empty()) throw InvalidArgument("background has no query other than q0");
    vocab.intents.resize(model.intents);
    for (std::size_t i = 0; i < model.intents; ++i) {
        for (const auto& [q, p] : model.reformulation[i]) {
            if (q != model.q0.raw) add_entry(vocab.intents[i], normalizer.normalize(q), p);
        }
    }
    return vocab;
}

std::pair<Interaction, LatentTrace> sample_interaction(const IntentMixtureModel& model, const Serp& serp,
                                                       const ReformulationVocab& vocab, Rng& rng) {
    const std::size_t J = serp.size();
    if (J == 0) throw InvalidArgument("cannot sample on an empty SERP");

    std::vector<double> marginal(model.intents);
    for (std::size_t i = 0; i < model.intents; ++i) marginal[i] = model.intent_marginal(i);

    LatentTrace trace;
    trace.intent = rng.categorical(marginal);
    trace.examined.assign(J, false);
    trace.attracted.assign(J, false);
    trace.satisfied.assign(J, false);
    trace.new_query.assign(J, false);
    trace.continued = 1;

    Interaction o;
    o.q0 = model.q0;
    o.serp = serp;
    o.clicks.assign(J, false);

    for (std::size_t j = 0; j < J; ++j) {
        trace.examined[j] = true;
        const auto& doc = serp.doc_ids[j];
        trace.attracted[j] = rng.bernoulli(model.attractiveness(doc, trace.intent));
        if (trace.attracted[j]) {
            o.clicks[j] = true;
            o.click_events.push_back({j, 0});
            if (rng.bernoulli(model.satisfaction(doc, trace.intent))) {
                trace.satisfied[j] = true;
                trace.new_query[j] = true;
                trace.continued = 0;
                break;
            }
        }
    }
    if (trace.continued == 1) trace.new_query[J - 1] = true;

    const auto& intent_table = vocab.intents[trace.intent];
    const bool use_intent = trace.continued == 1 && !intent_table.queries.empty();
    o.q1 = draw(use_intent ? intent_table : vocab.background, rng);
    return {std::move(o), std::move(trace)};
}

std::pair<Interaction, LatentTrace> sample_interaction(const IntentMixtureModel& model, const Serp& serp,
                                                       const ReformulationVocab& vocab, std::uint64_t seed) {
    Rng rng(seed);
    return sample_interaction(model, serp, vocab, rng);
}

}  // namespace qsuggest
