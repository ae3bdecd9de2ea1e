#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "qsuggest/corpus.hpp"
#include "qsuggest/model_io.hpp"
#include "qsuggest/user_model.hpp"

namespace qsuggest {

struct BetaPrior {
    double alpha = 2.0;
    double beta = 2.0;

    /// Posterior mode with no observations.
    double mode() const { return (alpha - 1.0) / (alpha + beta - 2.0); }
};

enum class InitStrategy { LastClick, Random };

struct TrainConfig {
    InitStrategy init = InitStrategy::LastClick;
    /// Cap on the number of intents for last-click init; exact count for random init.
    std::size_t intents = 8;
    BetaPrior attract_prior;
    BetaPrior satisfy_prior;
    double dirichlet_eta = 1.1;        // intent LM pseudo-count is eta - 1 per token
    double state_pseudo_count = 0.1;   // added to every P(c, i) cell
    std::vector<double> anneal_schedule{0.5, 0.7, 0.85, 1.0};
    std::size_t anneal_iters = 10;     // iterations per temperature below 1
    std::size_t max_iters = 75;        // total, annealing included
    double ll_tol = 0.005;
    std::size_t interaction_cap = 5000;
    double prune_fraction = 1e-3;      // drop intents with mass < fraction * N
    std::uint64_t seed = 1;
    /// Called with the model after every M-step (iteration index, model
    /// without reformulation table). Used by invariant sweeps.
    std::function<void(std::size_t, const IntentMixtureModel&)> observer;

    /// Throws InvalidArgument when the config cannot produce an interior MAP fit.
    void validate() const;
};

enum class StopReason { Converged, MaxIters };

struct IterationRecord {
    double temperature = 1.0;
    double log_posterior = 0.0;  // of the parameters entering this iteration, at temperature 1
};

struct FitReport {
    std::string q0;
    std::size_t interactions_used = 0;
    std::vector<IterationRecord> iterations;
    StopReason reason = StopReason::MaxIters;
    double final_log_posterior = 0.0;
    std::vector<double> intent_mass;            // sum of responsibilities per surviving intent
    std::size_t pruned_intents = 0;
    std::vector<std::size_t> empty_reformulation_intents;
};

struct FitResult {
    IntentMixtureModel model;
    FitReport report;
};

/// Uniform subsample of at most `cap` interactions, original order kept.
std::vector<Interaction> cap_interactions(const std::vector<Interaction>& interactions, std::size_t cap,
                                          std::uint64_t seed);

/// Initial model: hardened responsibilities followed by one M-step.
IntentMixtureModel init_params(const std::vector<Interaction>& interactions, const TrainConfig& config);

/// MAP-EM with deterministic annealing. All interactions must share q0.
/// The reformulation table of the returned model is filled in.
FitResult em_fit(const std::vector<Interaction>& interactions, const BackgroundModel& background,
                 const TrainConfig& config);
/// Same, starting from a given model instead of init_params.
FitResult em_fit(const std::vector<Interaction>& interactions, const BackgroundModel& background,
                 const TrainConfig& config, const IntentMixtureModel& initial);

/// Sum over interactions of log P(o) plus the log prior of the parameters.
double log_posterior(const IntentMixtureModel& model, const BackgroundModel& background,
                     const std::vector<Interaction>& interactions, const TrainConfig& config);
/// Sum over interactions of log P(o).
double data_loglik(const IntentMixtureModel& model, const BackgroundModel& background,
                   const std::vector<Interaction>& interactions);

/// P(q1 | c=1, i) as the ratio of c=1 responsibilities over interactions
/// ending in q1 to those over all interactions. Intents with zero
/// denominator get an empty table and are listed in `empty_intents`.
std::vector<std::map<std::string, double>> reformulation_probs(const IntentMixtureModel& model,
                                                               const BackgroundModel& background,
                                                               const std::vector<Interaction>& interactions,
                                                               std::vector<std::size_t>* empty_intents = nullptr);

/// Held-out selection of the intent count: fits each candidate count with
/// random init on a split of the data and returns the best by held-out
/// log-likelihood.
std::size_t select_intent_count(const std::vector<Interaction>& interactions, const BackgroundModel& background,
                                const TrainConfig& config, std::size_t max_intents = 8,
                                double holdout_fraction = 0.2);

/// Fits every training query; work is spread over `threads` workers.
struct TrainOutput {
    ModelSet models;
    std::vector<FitReport> reports;
};
TrainOutput train_all(const Corpus& corpus, const TrainConfig& config, unsigned threads = 1);

void write_fit_reports(std::ostream& out, const std::vector<FitReport>& reports);

std::string to_string(StopReason reason);

}  // namespace qsuggest
