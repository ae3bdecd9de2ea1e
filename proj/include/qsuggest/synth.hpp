#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qsuggest/corpus.hpp"
#include "qsuggest/model_io.hpp"
#include "qsuggest/ranker.hpp"
#include "qsuggest/user_model.hpp"

namespace qsuggest {

/// Weighted query; weights are normalized within their list.
struct WeightedQuery {
    std::string query;
    double weight = 0.0;
};

struct WorldIntent {
    double weight = 1.0;
    std::map<std::string, double> attract;
    std::map<std::string, double> satisfy;
    double default_attract = 0.1;
    double default_satisfy = 0.5;
    std::vector<WeightedQuery> reformulations;
};

struct WorldQuery {
    std::string query;
    std::size_t interactions = 0;
    std::vector<std::string> docs;   // SERP pool; the canonical SERP is its first serp_size entries
    bool shuffle_serp = false;       // draw a fresh random ordering of the pool per interaction
    std::vector<WorldIntent> intents;
};

/// Ground truth for a synthetic log.
///
/// Stored as JSON:
///
///     {"schema_version": 1, "seed": 7, "serp_size": 4, "filler_sessions": 0,
///      "background": [{"query": "...", "weight": 2.0}, ...],
///      "queries": [{"query": "...", "interactions": 500, "docs": [...],
///                   "shuffle_serp": false,
///                   "intents": [{"weight": 0.6, "attract": {"d1": 0.8},
///                                "satisfy": {"d1": 0.4}, "default_attract": 0.1,
///                                "default_satisfy": 0.5,
///                                "reformulations": [{"query": "...", "weight": 1}]}]}]}
///
/// Every reformulation must also appear in the background list, so every
/// candidate has a positive P_g.
struct WorldSpec {
    std::uint64_t seed = 1;
    std::size_t serp_size = 10;
    std::size_t filler_sessions = 0;
    std::vector<WeightedQuery> background;
    std::vector<WorldQuery> queries;

    void validate() const;
};

WorldSpec load_world(std::istream& in);
WorldSpec load_world(const std::filesystem::path& path);
void save_world(std::ostream& out, const WorldSpec& world);

/// World P_g and the term distribution it induces.
BackgroundModel true_background(const WorldSpec& world, const Normalizer& normalizer);
/// Intent model of one world query with the generating parameters. P(c, i)
/// is P(i) times the continuation probability on the canonical SERP.
IntentMixtureModel true_model(const WorldSpec& world, const WorldQuery& query, const Normalizer& normalizer);
ModelSet true_models(const WorldSpec& world, const Normalizer& normalizer);
CandidateIndex true_index(const WorldSpec& world, const Normalizer& normalizer);

/// Hidden variables behind one generated interaction. Filler sessions have intent -1.
struct TruthRecord {
    std::string user;
    std::int64_t time = 0;
    std::string q0;
    int intent = -1;
    LatentTrace trace;
};

struct SyntheticLog {
    std::vector<LogEvent> events;
    std::vector<TruthRecord> truth;
};

/// Forward-samples every world query's interactions and the filler sessions.
/// Gaps within an interaction stay under 300 s; sessions of one user are
/// separated by more than 300 s.
SyntheticLog generate_log(const WorldSpec& world, const Normalizer& normalizer = {});

void write_event_log(std::ostream& out, const std::vector<LogEvent>& events);
void write_truth(std::ostream& out, const std::vector<TruthRecord>& truth);

/// Exact-inference ranking with the world's generating parameters.
///
/// Click-history likelihoods are obtained by enumerating every latent
/// (attraction, satisfaction) assignment, not from the closed forms. Limited
/// to worlds with at most 4 intents, 50 candidates and 4 SERP positions.
RankedSuggestions oracle_rank(const WorldSpec& world, std::string_view prefix, const SuggestionContext& context,
                              std::size_t n, bool diversify, const Normalizer& normalizer = {});

/// Parameters of the procedural world builder.
struct RandomWorldOptions {
    std::uint64_t seed = 1;
    std::size_t queries = 10;
    std::size_t min_intents = 2;
    std::size_t max_intents = 4;
    std::size_t vocab = 200;
    std::size_t docs_per_query = 20;
    std::size_t serp_size = 10;
    bool shuffle_serp = true;
    std::size_t reformulations_per_intent = 6;
    std::size_t competitors_per_prefix = 3;  // background queries sharing a reformulation's prefix
    std::size_t extra_background = 100;      // unrelated background queries
    std::size_t interactions_per_query = 5000;
    std::size_t filler_sessions = 0;
    /// Every interaction ends the task: satisfaction is certain on click and
    /// reformulations follow the background distribution.
    bool null_world = false;
};

WorldSpec random_world(const RandomWorldOptions& options);

}  // namespace qsuggest
