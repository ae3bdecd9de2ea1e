#include "qsuggest/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "qsuggest/error.hpp"

namespace qsuggest {

void SuggestionContext::validate() const {
    std::set<std::string_view> seen;
    for (const auto& r : shown) {
        if (!seen.insert(r).second) throw InvalidArgument("shown suggestion listed twice: " + r);
    }
    if (history == HistoryKind::Full) {
        if (serp.size() == 0) throw InvalidArgument("full history requires a nonempty SERP");
        if (clicks.size() != serp.size()) throw InvalidArgument("click vector length must equal SERP length");
    }
}

std::string_view to_string(Variant variant) {
    switch (variant) {
        case Variant::Baseline: return "baseline";
        case Variant::QCntx: return "qcntx";
        case Variant::QCntxDiv: return "qcntxdiv";
        case Variant::FCntx: return "fcntx";
        case Variant::FCntxDiv: return "fcntxdiv";
    }
    return "unknown";
}

std::optional<Variant> parse_variant(std::string_view name) {
    const std::string folded = fold_case(name);
    for (Variant v : kAllVariants) {
        if (to_string(v) == folded) return v;
    }
    return std::nullopt;
}

HistoryKind history_of(Variant variant) {
    switch (variant) {
        case Variant::Baseline: return HistoryKind::None;
        case Variant::QCntx:
        case Variant::QCntxDiv: return HistoryKind::QueryOnly;
        case Variant::FCntx:
        case Variant::FCntxDiv: return HistoryKind::Full;
    }
    return HistoryKind::None;
}

bool is_diversified(Variant variant) { return variant == Variant::QCntxDiv || variant == Variant::FCntxDiv; }

bool ranks_before(double score_a, std::string_view raw_a, double score_b, std::string_view raw_b) {
    if (score_a != score_b) return score_a > score_b;
    return raw_a < raw_b;
}

namespace {

double log_shown_factor(const IntentMixtureModel& model, const BackgroundModel& background,
                        const std::vector<std::string>& shown, int c, std::size_t intent) {
    double ll = 0.0;
    for (const auto& r : shown) {
        const double p = c == 1 ? model.reformulation_probability(r, intent) : background.query_probability(r);
        ll += std::log1p(-p);
    }
    return ll;
}

}  // namespace

double context_likelihood_query_only(const IntentMixtureModel& model, const BackgroundModel& background,
                                     const std::vector<std::string>& shown, int c, std::size_t intent) {
    return std::exp(log_shown_factor(model, background, shown, c, intent));
}

double context_likelihood_full(const IntentMixtureModel& model, const BackgroundModel& background,
                               const Serp& serp, const std::vector<bool>& clicks,
                               const std::vector<std::string>& shown, int c, std::size_t intent) {
    return std::exp(click_loglik(model, serp, clicks, c, intent) +
                    log_shown_factor(model, background, shown, c, intent));
}

ContextPosterior intent_posterior(const IntentMixtureModel* model, const BackgroundModel& background,
                                  const SuggestionContext& context) {
    ContextPosterior post;
    if (context.history == HistoryKind::None) return post;
    if (!model) throw InvalidArgument("a model is required for a contextual posterior");
    const std::size_t m = model->intents;
    std::vector<double> weights(2 * m, kNegInf);
    for (int c = 0; c <= 1; ++c) {
        for (std::size_t i = 0; i < m; ++i) {
            const double prior = model->prior(c, i);
            if (prior <= 0.0) continue;
            double ll = log_shown_factor(*model, background, context.shown, c, i);
            if (context.history == HistoryKind::Full) {
                ll += click_loglik(*model, context.serp, context.clicks, c, i);
            }
            weights[IntentMixtureModel::state(c, i, m)] = ll + std::log(prior);
        }
    }
    const double evidence = log_sum_exp(weights);
    if (evidence == kNegInf) throw Error("context has zero probability under every state");
    const std::vector<double> continued(weights.begin() + static_cast<std::ptrdiff_t>(m), weights.end());
    const double continued_mass = log_sum_exp(continued);
    post.intent_dist.assign(m, 0.0);
    if (continued_mass == kNegInf) return post;
    post.p_continue = std::exp(continued_mass - evidence);
    for (std::size_t i = 0; i < m; ++i) post.intent_dist[i] = std::exp(continued[i] - continued_mass);
    return post;
}

double score_candidate(const IntentMixtureModel* model, const BackgroundModel& background,
                       const ContextPosterior& posterior, const Candidate& candidate, const RankerOptions& options) {
    (void)background;
    double score = candidate.prior * (1.0 - posterior.p_continue);
    if (posterior.p_continue <= 0.0 || !model) return score;
    double continued = 0.0;
    for (std::size_t i = 0; i < posterior.intent_dist.size(); ++i) {
        double p = model->reformulation_probability(candidate.query.raw, i);
        if (p == 0.0 && options.backoff_weight > 0.0) {
            p = options.backoff_weight;
            for (const auto& t : candidate.query.terms) p *= model->term_probability(t, i);
        }
        continued += posterior.intent_dist[i] * p;
    }
    return score + posterior.p_continue * continued;
}

RankedSuggestions baseline_rank(const CandidateIndex& index, std::string_view prefix, std::size_t n,
                                std::size_t pool) {
    auto matches = index.lookup(prefix);
    std::sort(matches.begin(), matches.end(), [](const Candidate* a, const Candidate* b) {
        return ranks_before(a->prior, a->query.raw, b->prior, b->query.raw);
    });
    RankedSuggestions out;
    out.pool.assign(matches.begin(), matches.begin() + static_cast<std::ptrdiff_t>(std::min(matches.size(), pool)));
    for (std::size_t k = 0; k < matches.size() && k < n; ++k) {
        out.entries.push_back({matches[k]->query.raw, matches[k]->prior});
    }
    return out;
}

RankedSuggestions rank_suggestions(const ModelSet& models, const BackgroundModel& background,
                                   const CandidateIndex& index, std::string_view prefix,
                                   const SuggestionContext& context, bool diversify, std::size_t n,
                                   const RankerOptions& options) {
    if (prefix.empty()) throw InvalidArgument("prefix must be nonempty");
    if (n > options.pool) throw InvalidArgument("requested list is longer than the candidate pool");
    context.validate();

    const IntentMixtureModel* model = nullptr;
    if (context.history != HistoryKind::None) {
        const auto it = models.find(context.q0.raw);
        if (it != models.end()) model = &it->second;
    }
    if (!model) return baseline_rank(index, prefix, n, options.pool);

    std::set<std::string_view> shown(context.shown.begin(), context.shown.end());
    std::vector<const Candidate*> pool;
    for (const Candidate* c : index.lookup(prefix)) {
        if (!shown.contains(c->query.raw)) pool.push_back(c);
    }

    RankedSuggestions out;
    const ContextPosterior initial = intent_posterior(model, background, context);
    std::vector<std::pair<double, const Candidate*>> scored;
    scored.reserve(pool.size());
    for (const Candidate* c : pool) scored.emplace_back(score_candidate(model, background, initial, *c, options), c);
    auto before = [](const auto& x, const auto& y) {
        return ranks_before(x.first, x.second->query.raw, y.first, y.second->query.raw);
    };
    const std::size_t keep = std::min(options.pool, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), before);
    scored.resize(keep);
    for (const auto& entry : scored) out.pool.push_back(entry.second);

    if (!diversify) {
        out.step_posteriors.push_back(initial);
        for (std::size_t k = 0; k < scored.size() && k < n; ++k) {
            out.entries.push_back({scored[k].second->query.raw, scored[k].first});
        }
        return out;
    }

    SuggestionContext step = context;
    std::vector<const Candidate*> remaining;
    for (const auto& [score, c] : scored) remaining.push_back(c);
    for (std::size_t k = 0; k < n && !remaining.empty(); ++k) {
        const ContextPosterior post = k == 0 ? initial : intent_posterior(model, background, step);
        std::size_t best = 0;
        double best_score = -1.0;
        for (std::size_t r = 0; r < remaining.size(); ++r) {
            const double s = score_candidate(model, background, post, *remaining[r], options);
            if (best_score < 0.0 || ranks_before(s, remaining[r]->query.raw, best_score, remaining[best]->query.raw)) {
                best = r;
                best_score = s;
            }
        }
        out.step_posteriors.push_back(post);
        out.entries.push_back({remaining[best]->query.raw, best_score});
        step.shown.push_back(remaining[best]->query.raw);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
    }
    return out;
}

RankedSuggestions rank_variant(const ModelSet& models, const BackgroundModel& background, const CandidateIndex& index,
                               std::string_view prefix, SuggestionContext context, Variant variant, std::size_t n,
                               const RankerOptions& options) {
    if (variant == Variant::Baseline) {
        if (prefix.empty()) throw InvalidArgument("prefix must be nonempty");
        return baseline_rank(index, prefix, n, options.pool);
    }
    HistoryKind wanted = history_of(variant);
    if (wanted == HistoryKind::Full && context.serp.size() == 0) wanted = HistoryKind::QueryOnly;
    if (wanted == HistoryKind::QueryOnly && context.history == HistoryKind::Full) {
        context.serp = {};
        context.clicks.clear();
    }
    if (context.history != HistoryKind::None) context.history = wanted;
    return rank_suggestions(models, background, index, prefix, context, is_diversified(variant), n, options);
}

}  // namespace qsuggest
