#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qsuggest/corpus.hpp"
#include "qsuggest/model_io.hpp"
#include "qsuggest/ranker.hpp"

namespace qsuggest {

/// Reciprocal rank of `target` if it is within the first `k` entries, else 0.
double mrr_at_k(const std::vector<RankedEntry>& ranked, std::string_view target, std::size_t k = 10);

/// True iff q1's token sequence starts with q0's.
bool is_prefix(const QueryText& q0, const QueryText& q1);

/// Two-sided paired t-test p-value.
double paired_significance(std::span<const double> a, std::span<const double> b);

struct EvalOptions {
    std::vector<Variant> variants{std::begin(kAllVariants), std::end(kAllVariants)};
    std::size_t prefix_len = 3;
    std::size_t cutoff = 10;
    RankerOptions ranker;
    unsigned threads = 1;
};

struct SliceDefinition {
    std::string name;
    std::function<bool(const Interaction&)> member;
};

/// |q1| > 0..3 words, then isPrefix in {0, 1} crossed with |q1| > 0, 1.
std::vector<SliceDefinition> standard_slices();

struct SliceResult {
    std::string name;
    std::size_t count = 0;
    std::vector<double> mrr;           // per variant, report order
    std::vector<double> relative;      // (MRR_v - MRR_base) / MRR_base; 0 without baseline
    std::vector<double> p_vs_baseline; // paired t-test against the baseline
};

struct PairTest {
    std::string slice;
    Variant a;
    Variant b;
    double mean_difference = 0.0;  // mean(RR_a - RR_b)
    double p_value = 1.0;
};

struct EvaluationReport {
    std::vector<Variant> variants;
    std::size_t input_interactions = 0;
    std::size_t dropped_untrained = 0;   // q0 without a model
    std::size_t evaluated = 0;
    std::size_t target_missing = 0;      // q1 absent from the candidate index
    std::vector<double> pool_recall;     // per variant: q1 inside the first-step pool
    std::vector<SliceResult> slices;
    std::vector<PairTest> pair_tests;
    /// Reciprocal ranks, [variant][interaction] over evaluated interactions.
    std::vector<std::vector<double>> reciprocal_ranks;

    double mrr(Variant variant, std::string_view slice = "|q1|>0") const;
};

/// Log-replay evaluation: for each test interaction whose q0 has a model,
/// ranks candidates for the first `prefix_len` characters of q1 under every
/// variant and records the reciprocal rank of q1.
EvaluationReport evaluate(const std::vector<Interaction>& test, const ModelSet& models,
                          const BackgroundModel& background, const CandidateIndex& index,
                          const EvalOptions& options = {});

/// Prefix typed by the user: the first `prefix_len` bytes of q1, or all of it.
std::string typed_prefix(const QueryText& q1, std::size_t prefix_len);

/// Tab-separated relative-improvement table, one row per slice.
void write_report_table(std::ostream& out, const EvaluationReport& report);
/// JSON document with every field of the report except per-interaction ranks.
void write_report_json(std::ostream& out, const EvaluationReport& report);

}  // namespace qsuggest
