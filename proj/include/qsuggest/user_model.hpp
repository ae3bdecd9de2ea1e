#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qsuggest/corpus.hpp"
#include "qsuggest/rng.hpp"
#include "qsuggest/text.hpp"

namespace qsuggest {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Per-q0 mixture of intent-specific cascade click models and reformulation
/// language models.
///
/// State (c, i) is stored at index `c * intents + i`; c = 1 means the user
/// continues the q0 search task.
struct IntentMixtureModel {
    QueryText q0;
    std::size_t intents = 0;
    std::vector<double> state_prior;                      // P(c, i), 2 * intents cells
    std::map<std::string, std::vector<double>> attract;   // doc -> a_{d,i}
    std::map<std::string, std::vector<double>> satisfy;   // doc -> s_{d,i}
    double default_attract = 0.5;                         // used for unseen (doc, intent)
    double default_satisfy = 0.5;
    std::vector<std::map<std::string, double>> intent_lm; // P^lm(t | c=1, i)
    std::vector<double> lm_floor;                         // P^lm for out-of-vocabulary terms
    std::vector<std::map<std::string, double>> reformulation;  // P(q1 | c=1, i)

    static std::size_t state(int c, std::size_t intent, std::size_t intents) {
        return static_cast<std::size_t>(c) * intents + intent;
    }
    double prior(int c, std::size_t intent) const { return state_prior[state(c, intent, intents)]; }
    /// P(i) = sum_c P(c, i)
    double intent_marginal(std::size_t intent) const { return prior(0, intent) + prior(1, intent); }
    double continue_marginal() const;

    double attractiveness(std::string_view doc, std::size_t intent) const;
    double satisfaction(std::string_view doc, std::size_t intent) const;
    double term_probability(std::string_view term, std::size_t intent) const;
    /// P(q1 | c=1, i); zero for queries not in the table.
    double reformulation_probability(std::string_view q1, std::size_t intent) const;
};

/// Throws InvalidArgument when a distribution invariant is violated
/// (prior sums to 1, LMs sum to 1, tables sum to <= 1, a and s in range).
void check_model(const IntentMixtureModel& model, double tolerance = 1e-9, bool require_interior = false);

/// Latent variables of one sampled interaction.
struct LatentTrace {
    std::size_t intent = 0;
    int continued = 1;
    std::vector<bool> examined;
    std::vector<bool> attracted;
    std::vector<bool> satisfied;
    std::vector<bool> new_query;
};

/// Returns an empty string if `trace` obeys the cascade constraints and
/// produces `clicks`; otherwise a description of the first violation.
std::string trace_violation(const LatentTrace& trace, const std::vector<bool>& clicks);

/// Joint posterior over (c, i), same layout as IntentMixtureModel::state_prior.
struct StatePosterior {
    std::size_t intents = 0;
    std::vector<double> gamma;

    double at(int c, std::size_t intent) const { return gamma[IntentMixtureModel::state(c, intent, intents)]; }
};

/// log P(H, c | i) of an observed click pattern under the cascade model.
/// Returns -inf for c = 0 without clicks.
double click_loglik(const IntentMixtureModel& model, const Serp& serp, const std::vector<bool>& clicks, int c,
                    std::size_t intent);
double click_loglik(const IntentMixtureModel& model, const Interaction& interaction, int c, std::size_t intent);

/// log P(q1 | c, i): background unigram LM for c = 0, intent LM for c = 1.
double query_loglik(const IntentMixtureModel& model, const BackgroundModel& background, const QueryText& q1, int c,
                    std::size_t intent);

/// log[P_cl * P_q * P(c, i)] for every state.
std::vector<double> state_log_joint(const IntentMixtureModel& model, const BackgroundModel& background,
                                    const Interaction& interaction);

/// Tempered posterior: gamma(c, i) proportional to (P_cl * P_q * P(c, i))^beta.
StatePosterior responsibilities(const IntentMixtureModel& model, const BackgroundModel& background,
                                const Interaction& interaction, double beta = 1.0);

/// log(sum(exp(values))), stable; -inf for an all -inf input.
double log_sum_exp(const std::vector<double>& values);

/// Categorical sampling tables for q1 draws.
struct ReformulationVocab {
    struct Table {
        std::vector<QueryText> queries;
        std::vector<double> cumulative;
    };
    Table background;
    std::vector<Table> intents;
};

ReformulationVocab build_reformulation_vocab(const IntentMixtureModel& model, const BackgroundModel& background,
                                             const Normalizer& normalizer);

/// Forward-samples one interaction on `serp`. The returned interaction has
/// zero timestamps; q1 never equals q0.
std::pair<Interaction, LatentTrace> sample_interaction(const IntentMixtureModel& model, const Serp& serp,
                                                       const ReformulationVocab& vocab, Rng& rng);
std::pair<Interaction, LatentTrace> sample_interaction(const IntentMixtureModel& model, const Serp& serp,
                                                       const ReformulationVocab& vocab, std::uint64_t seed);

}  // namespace qsuggest
