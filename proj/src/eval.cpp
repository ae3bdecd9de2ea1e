#include "qsuggest/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

#include <boost/math/distributions/students_t.hpp>
#include "json.hpp"

#include "qsuggest/error.hpp"

namespace qsuggest {

double mrr_at_k(const std::vector<RankedEntry>& ranked, std::string_view target, std::size_t k) {
    for (std::size_t r = 0; r < ranked.size() && r < k; ++r) {
        if (ranked[r].query == target) return 1.0 / static_cast<double>(r + 1);
    }
    return 0.0;
}

bool is_prefix(const QueryText& q0, const QueryText& q1) { return is_token_prefix(q0, q1); }

double paired_significance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidArgument("paired test needs equal-length samples");
    const std::size_t n = a.size();
    if (n < 2) return 1.0;
    double mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) mean += a[k] - b[k];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double d = a[k] - b[k] - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) return mean == 0.0 ? 1.0 : 0.0;
    const double t = mean / (sd / std::sqrt(static_cast<double>(n)));
    const boost::math::students_t dist(static_cast<double>(n - 1));
    return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

std::string typed_prefix(const QueryText& q1, std::size_t prefix_len) {
    return q1.raw.substr(0, std::min(prefix_len, q1.raw.size()));
}

namespace {

std::size_t word_count(const QueryText& q) {
    if (q.raw.empty()) return 0;
    return static_cast<std::size_t>(std::count(q.raw.begin(), q.raw.end(), ' ')) + 1;
}

}  // namespace

std::vector<SliceDefinition> standard_slices() {
    std::vector<SliceDefinition> slices;
    for (std::size_t n = 0; n <= 3; ++n) {
        slices.push_back({"|q1|>" + std::to_string(n), [n](const Interaction& o) { return word_count(o.q1) > n; }});
    }
    for (int prefix = 0; prefix <= 1; ++prefix) {
        for (std::size_t n = 0; n <= 1; ++n) {
            slices.push_back({"isPrefix=" + std::to_string(prefix) + ",|q1|>" + std::to_string(n),
                              [prefix, n](const Interaction& o) {
                                  return static_cast<int>(is_prefix(o.q0, o.q1)) == prefix && word_count(o.q1) > n;
                              }});
        }
    }
    return slices;
}

double EvaluationReport::mrr(Variant variant, std::string_view slice) const {
    for (std::size_t v = 0; v < variants.size(); ++v) {
        if (variants[v] != variant) continue;
        for (const auto& s : slices) {
            if (s.name == slice) return s.mrr[v];
        }
    }
    throw InvalidArgument("no such variant/slice in report");
}

EvaluationReport evaluate(const std::vector<Interaction>& test, const ModelSet& models,
                          const BackgroundModel& background, const CandidateIndex& index,
                          const EvalOptions& options) {
    if (test.empty()) throw InvalidArgument("empty test set");
    if (options.variants.empty()) throw InvalidArgument("no variants to evaluate");
    if (options.prefix_len == 0) throw InvalidArgument("prefix length must be positive");

    EvaluationReport report;
    report.variants = options.variants;
    report.input_interactions = test.size();

    std::vector<const Interaction*> kept;
    for (const auto& o : test) {
        if (models.contains(o.q0.raw)) {
            kept.push_back(&o);
        } else {
            ++report.dropped_untrained;
        }
    }
    report.evaluated = kept.size();
    if (kept.empty()) throw InvalidArgument("no test interaction starts with a trained query");

    const std::size_t V = options.variants.size();
    const std::size_t n = std::min(options.cutoff, options.ranker.pool);
    report.reciprocal_ranks.assign(V, std::vector<double>(kept.size(), 0.0));
    std::vector<std::vector<std::uint8_t>> in_pool(V, std::vector<std::uint8_t>(kept.size(), 0));
    std::vector<std::uint8_t> missing(kept.size(), 0);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < kept.size(); k = next++) {
            const Interaction& o = *kept[k];
            if (!index.find(o.q1.raw)) {
                missing[k] = 1;
                continue;
            }
            const std::string prefix = typed_prefix(o.q1, options.prefix_len);
            SuggestionContext context;
            context.history = HistoryKind::Full;
            context.q0 = o.q0;
            context.serp = o.serp;
            context.clicks = o.clicks;
            for (std::size_t v = 0; v < V; ++v) {
                const auto ranked =
                    rank_variant(models, background, index, prefix, context, options.variants[v], n, options.ranker);
                report.reciprocal_ranks[v][k] = mrr_at_k(ranked.entries, o.q1.raw, options.cutoff);
                for (const Candidate* c : ranked.pool) {
                    if (c->query.raw == o.q1.raw) {
                        in_pool[v][k] = 1;
                        break;
                    }
                }
            }
        }
    };
    const unsigned threads = std::max(1u, options.threads);
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    for (auto flag : missing) report.target_missing += flag;
    report.pool_recall.resize(V);
    for (std::size_t v = 0; v < V; ++v) {
        std::size_t hits = 0;
        for (auto flag : in_pool[v]) hits += flag;
        report.pool_recall[v] = static_cast<double>(hits) / static_cast<double>(kept.size());
    }

    std::size_t base = V;
    for (std::size_t v = 0; v < V; ++v) {
        if (options.variants[v] == Variant::Baseline) base = v;
    }

    for (const auto& slice : standard_slices()) {
        std::vector<std::size_t> members;
        for (std::size_t k = 0; k < kept.size(); ++k) {
            if (slice.member(*kept[k])) members.push_back(k);
        }
        std::vector<std::vector<double>> rr(V);
        for (std::size_t v = 0; v < V; ++v) {
            for (std::size_t k : members) rr[v].push_back(report.reciprocal_ranks[v][k]);
        }
        SliceResult result;
        result.name = slice.name;
        result.count = members.size();
        for (std::size_t v = 0; v < V; ++v) {
            double total = 0.0;
            for (double x : rr[v]) total += x;
            result.mrr.push_back(members.empty() ? 0.0 : total / static_cast<double>(members.size()));
        }
        for (std::size_t v = 0; v < V; ++v) {
            const bool have_base = base < V && result.mrr[base] > 0.0;
            result.relative.push_back(have_base ? (result.mrr[v] - result.mrr[base]) / result.mrr[base] : 0.0);
            result.p_vs_baseline.push_back(base < V ? paired_significance(rr[v], rr[base]) : 1.0);
        }
        for (std::size_t a = 0; a < V; ++a) {
            for (std::size_t b = a + 1; b < V; ++b) {
                double diff = 0.0;
                for (std::size_t k = 0; k < members.size(); ++k) diff += rr[b][k] - rr[a][k];
                PairTest test_result{slice.name, options.variants[b], options.variants[a],
                                     members.empty() ? 0.0 : diff / static_cast<double>(members.size()),
                                     paired_significance(rr[b], rr[a])};
                report.pair_tests.push_back(test_result);
            }
        }
        report.slices.push_back(std::move(result));
    }
    return report;
}

namespace {

std::string signed_fixed(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%+.3f", value);
    return buf;
}

std::string fixed(double value, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
    return buf;
}

}  // namespace

void write_report_table(std::ostream& out, const EvaluationReport& report) {
    out << "slice\t#interactions";
    for (Variant v : report.variants) out << '\t' << to_string(v);
    out << '\n';
    for (const auto& s : report.slices) {
        out << s.name << '\t' << s.count;
        for (double r : s.relative) out << '\t' << signed_fixed(r);
        out << '\n';
    }
    out << "\nslice\t#interactions";
    for (Variant v : report.variants) out << "\tMRR@10 " << to_string(v);
    out << '\n';
    for (const auto& s : report.slices) {
        out << s.name << '\t' << s.count;
        for (double m : s.mrr) out << '\t' << fixed(m, 4);
        out << '\n';
    }
    out << "\nevaluated\t" << report.evaluated << "\ndropped_untrained\t" << report.dropped_untrained
        << "\ntarget_missing\t" << report.target_missing << '\n';
    for (std::size_t v = 0; v < report.variants.size(); ++v) {
        out << "pool_recall\t" << to_string(report.variants[v]) << '\t' << fixed(report.pool_recall[v], 4) << '\n';
    }
}

void write_report_json(std::ostream& out, const EvaluationReport& report) {
    nlohmann::ordered_json doc;
    doc["schema_version"] = 1;
    for (Variant v : report.variants) doc["variants"].push_back(std::string(to_string(v)));
    doc["input_interactions"] = report.input_interactions;
    doc["dropped_untrained"] = report.dropped_untrained;
    doc["evaluated"] = report.evaluated;
    doc["target_missing"] = report.target_missing;
    doc["pool_recall"] = report.pool_recall;
    doc["slices"] = nlohmann::ordered_json::array();
    for (const auto& s : report.slices) {
        nlohmann::ordered_json row;
        row["name"] = s.name;
        row["count"] = s.count;
        row["mrr"] = s.mrr;
        row["relative_improvement"] = s.relative;
        row["p_vs_baseline"] = s.p_vs_baseline;
        doc["slices"].push_back(std::move(row));
    }
    doc["pair_tests"] = nlohmann::ordered_json::array();
    for (const auto& t : report.pair_tests) {
        doc["pair_tests"].push_back({{"slice", t.slice},
                                     {"a", std::string(to_string(t.a))},
                                     {"b", std::string(to_string(t.b))},
                                     {"mean_difference", t.mean_difference},
                                     {"p_value", t.p_value}});
    }
    out << doc.dump(2) << '\n';
}

}  // namespace qsuggest
