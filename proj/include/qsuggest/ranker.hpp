#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qsuggest/corpus.hpp"
#include "qsuggest/model_io.hpp"
#include "qsuggest/user_model.hpp"

namespace qsuggest {

enum class HistoryKind { None, QueryOnly, Full };

/// Historical part (q0, optionally its SERP and clicks) plus the
/// diversification part (suggestions already placed and assumed failed).
struct SuggestionContext {
    HistoryKind history = HistoryKind::None;
    QueryText q0;
    Serp serp;
    std::vector<bool> clicks;
    std::vector<std::string> shown;  // raw text of already-selected candidates

    /// Throws InvalidArgument on duplicate shown entries or a malformed click vector.
    void validate() const;
};

struct ContextPosterior {
    double p_continue = 0.0;          // P(c=1 | T_k)
    std::vector<double> intent_dist;  // P(i | T_k, c=1)
};

struct RankedEntry {
    std::string query;
    double score = 0.0;  // P(q | T_k) at the step it was selected
};

struct RankedSuggestions {
    std::vector<RankedEntry> entries;
    /// Posterior used at each selection step; a single entry for
    /// non-diversified contextual rankings, none for the baseline.
    std::vector<ContextPosterior> step_posteriors;
    /// Candidates considered after the first (non-diversified) step.
    std::vector<const Candidate*> pool;
};

enum class Variant { Baseline, QCntx, QCntxDiv, FCntx, FCntxDiv };

std::string_view to_string(Variant variant);
std::optional<Variant> parse_variant(std::string_view name);
inline constexpr Variant kAllVariants[] = {Variant::Baseline, Variant::QCntx, Variant::QCntxDiv, Variant::FCntx,
                                           Variant::FCntxDiv};
HistoryKind history_of(Variant variant);
bool is_diversified(Variant variant);

struct RankerOptions {
    std::size_t pool = 100;
    /// Weight w of the term-level fallback w * prod_t P^lm(t | c=1, i) used for
    /// candidates absent from an intent's reformulation table; 0 disables it.
    double backoff_weight = 0.0;
};

/// P(Q^k | c=1, i) = prod_r [1 - P(r | c=1, i)] for c = 1, and
/// P(Q^k | c=0) = prod_r [1 - P_g(r)] for c = 0.
double context_likelihood_query_only(const IntentMixtureModel& model, const BackgroundModel& background,
                                     const std::vector<std::string>& shown, int c, std::size_t intent);

/// P(H | c, i) * P(Q^k | c[, i]) for a full (query, clicks, skips) history.
double context_likelihood_full(const IntentMixtureModel& model, const BackgroundModel& background,
                               const Serp& serp, const std::vector<bool>& clicks,
                               const std::vector<std::string>& shown, int c, std::size_t intent);

/// Bayes posterior over task continuation and intents given the context.
/// `model` may be null only for HistoryKind::None.
ContextPosterior intent_posterior(const IntentMixtureModel* model, const BackgroundModel& background,
                                  const SuggestionContext& context);

/// P(q | T_k) = P_g(q) (1 - p_continue) + p_continue * sum_i P(i | T_k, c=1) P(q | c=1, i).
double score_candidate(const IntentMixtureModel* model, const BackgroundModel& background,
                       const ContextPosterior& posterior, const Candidate& candidate,
                       const RankerOptions& options = {});

/// Top-N prefix matches by P_g; ties broken by raw text.
RankedSuggestions baseline_rank(const CandidateIndex& index, std::string_view prefix, std::size_t n,
                                std::size_t pool = 100);

/// Two-step ranking: the `pool` best matches by the non-diversified score,
/// then (for diversified variants) greedy selection with the placed
/// suggestions appended to the context at every step. Falls back to the
/// baseline when q0 has no model or the context carries no history.
RankedSuggestions rank_suggestions(const ModelSet& models, const BackgroundModel& background,
                                   const CandidateIndex& index, std::string_view prefix,
                                   const SuggestionContext& context, bool diversify, std::size_t n = 10,
                                   const RankerOptions& options = {});

/// Convenience wrapper selecting history kind and diversification from a
/// variant. Full-history variants use the query-only history when the
/// context has no SERP.
RankedSuggestions rank_variant(const ModelSet& models, const BackgroundModel& background, const CandidateIndex& index,
                               std::string_view prefix, SuggestionContext context, Variant variant,
                               std::size_t n = 10, const RankerOptions& options = {});

/// Orders by descending score, then ascending raw text.
bool ranks_before(double score_a, std::string_view raw_a, double score_b, std::string_view raw_b);

}  // namespace qsuggest
