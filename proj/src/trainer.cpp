#include "qsuggest/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <ostream>
#include <thread>
#include <unordered_map>

#include "qsuggest/error.hpp"
#include "qsuggest/rng.hpp"

namespace qsuggest {

void TrainConfig::validate() const {
    if (intents == 0) throw InvalidArgument("intent count must be positive");
    for (const auto* p : {&attract_prior, &satisfy_prior}) {
        if (!(p->alpha > 1.0 && p->beta > 1.0)) throw InvalidArgument("Beta prior parameters must exceed 1");
    }
    if (!(dirichlet_eta > 1.0)) throw InvalidArgument("Dirichlet eta must exceed 1");
    if (!(state_pseudo_count > 0.0)) throw InvalidArgument("state pseudo-count must be positive");
    if (anneal_schedule.empty() || anneal_schedule.back() != 1.0) {
        throw InvalidArgument("anneal schedule must end at 1.0");
    }
    for (std::size_t k = 0; k < anneal_schedule.size(); ++k) {
        if (!(anneal_schedule[k] > 0.0)) throw InvalidArgument("temperatures must be positive");
        if (k > 0 && !(anneal_schedule[k] > anneal_schedule[k - 1])) {
            throw InvalidArgument("temperatures must be strictly increasing");
        }
    }
    if (max_iters == 0) throw InvalidArgument("max_iters must be positive");
    if (!(ll_tol >= 0.0)) throw InvalidArgument("ll_tol must be non-negative");
    if (interaction_cap == 0) throw InvalidArgument("interaction cap must be positive");
}

std::string to_string(StopReason reason) {
    return reason == StopReason::Converged ? "converged" : "max_iters";
}

namespace {

// Dense view of one q0's interactions.
struct Dataset {
    QueryText q0;
    std::vector<std::string> docs;
    std::vector<std::string> terms;

    struct Row {
        std::vector<std::uint32_t> docs;
        std::vector<std::uint8_t> clicks;
        int last = -1;
        std::vector<std::pair<std::uint32_t, double>> term_counts;
        double background_ll = 0.0;
    };
    std::vector<Row> rows;
};

Dataset prepare(const std::vector<Interaction>& interactions, const BackgroundModel* background) {
    if (interactions.empty()) throw InvalidArgument("no interactions to fit");
    Dataset data;
    data.q0 = interactions.front().q0;
    std::map<std::string, std::uint32_t> doc_index;
    std::map<std::string, std::uint32_t> term_index;
    for (const auto& o : interactions) {
        if (o.q0.raw != data.q0.raw) throw InvalidArgument("interactions do not share q0");
        validate(o, std::max(kDefaultMaxSerpSize, o.serp.size()));
        for (const auto& d : o.serp.doc_ids) doc_index.emplace(d, 0);
        for (const auto& t : o.q1.terms) term_index.emplace(t, 0);
    }
    if (term_index.empty()) throw InvalidArgument("degenerate data for '" + data.q0.raw + "': no q1 terms");
    for (auto& [d, k] : doc_index) {
        k = static_cast<std::uint32_t>(data.docs.size());
        data.docs.push_back(d);
    }
    for (auto& [t, k] : term_index) {
        k = static_cast<std::uint32_t>(data.terms.size());
        data.terms.push_back(t);
    }
    data.rows.reserve(interactions.size());
    for (const auto& o : interactions) {
        Dataset::Row row;
        for (std::size_t j = 0; j < o.serp.size(); ++j) {
            row.docs.push_back(doc_index.at(o.serp.doc_ids[j]));
            row.clicks.push_back(o.clicks[j] ? 1 : 0);
            if (o.clicks[j]) row.last = static_cast<int>(j);
        }
        std::map<std::uint32_t, double> counts;
        for (const auto& t : o.q1.terms) counts[term_index.at(t)] += 1.0;
        row.term_counts.assign(counts.begin(), counts.end());
        if (background) {
            for (const auto& t : o.q1.terms) row.background_ll += std::log(background->term_probability(t));
        }
        data.rows.push_back(std::move(row));
    }
    return data;
}

struct Params {
    std::size_t m = 0;
    std::vector<double> a, s;    // [doc * m + i]
    std::vector<double> prior;   // [c * m + i]
    std::vector<double> lm;      // [i * V + t]
    std::vector<double> lm_floor;
};

// Responsibilities, [row * 2m + c * m + i].
using Gamma = std::vector<double>;

Params m_step(const Dataset& data, const Gamma& gamma, std::size_t m, const TrainConfig& cfg) {
    const std::size_t D = data.docs.size();
    const std::size_t V = data.terms.size();
    const std::size_t S = 2 * m;
    std::vector<double> click_num(D * m, 0.0), exam_den(D * m, 0.0), sat_num(D * m, 0.0), sat_den(D * m, 0.0);
    std::vector<double> state(S, 0.0), lm_num(m * V, 0.0);

    for (std::size_t r = 0; r < data.rows.size(); ++r) {
        const auto& row = data.rows[r];
        const double* g = &gamma[r * S];
        for (std::size_t i = 0; i < m; ++i) {
            const double g0 = g[i];
            const double g1 = g[m + i];
            state[i] += g0;
            state[m + i] += g1;
            const double both = g0 + g1;
            for (std::size_t j = 0; j < row.docs.size(); ++j) {
                const std::size_t di = row.docs[j] * m + i;
                const bool within_c0 = static_cast<int>(j) <= row.last;
                exam_den[di] += g1 + (within_c0 ? g0 : 0.0);
                if (row.clicks[j]) {
                    click_num[di] += both;
                    sat_den[di] += both;
                }
            }
            if (row.last >= 0) sat_num[row.docs[static_cast<std::size_t>(row.last)] * m + i] += g0;
            for (const auto& [t, n] : row.term_counts) lm_num[i * V + t] += g1 * n;
        }
    }

    Params p;
    p.m = m;
    p.a.resize(D * m);
    p.s.resize(D * m);
    const auto& pa = cfg.attract_prior;
    const auto& ps = cfg.satisfy_prior;
    for (std::size_t k = 0; k < D * m; ++k) {
        p.a[k] = (pa.alpha - 1.0 + click_num[k]) / (pa.alpha + pa.beta - 2.0 + exam_den[k]);
        p.s[k] = (ps.alpha - 1.0 + sat_num[k]) / (ps.alpha + ps.beta - 2.0 + sat_den[k]);
    }
    p.prior.resize(S);
    const double state_total = std::accumulate(state.begin(), state.end(), 0.0) + cfg.state_pseudo_count * S;
    for (std::size_t k = 0; k < S; ++k) p.prior[k] = (cfg.state_pseudo_count + state[k]) / state_total;
    p.lm.resize(m * V);
    p.lm_floor.resize(m);
    const double eta = cfg.dirichlet_eta - 1.0;
    for (std::size_t i = 0; i < m; ++i) {
        double total = 0.0;
        for (std::size_t t = 0; t < V; ++t) total += eta + lm_num[i * V + t];
        for (std::size_t t = 0; t < V; ++t) p.lm[i * V + t] = (eta + lm_num[i * V + t]) / total;
        p.lm_floor[i] = eta / total;
    }
    return p;
}

double log_prior(const Params& p, const TrainConfig& cfg) {
    double lp = 0.0;
    const auto& pa = cfg.attract_prior;
    const auto& ps = cfg.satisfy_prior;
    for (std::size_t k = 0; k < p.a.size(); ++k) {
        lp += (pa.alpha - 1.0) * std::log(p.a[k]) + (pa.beta - 1.0) * std::log1p(-p.a[k]);
        lp += (ps.alpha - 1.0) * std::log(p.s[k]) + (ps.beta - 1.0) * std::log1p(-p.s[k]);
    }
    for (double v : p.lm) lp += (cfg.dirichlet_eta - 1.0) * std::log(v);
    for (double v : p.prior) lp += cfg.state_pseudo_count * std::log(v);
    return lp;
}

// Fills tempered responsibilities; returns the untempered data log-likelihood.
double e_step(const Dataset& data, const Params& p, double beta, Gamma& gamma) {
    const std::size_t m = p.m;
    const std::size_t S = 2 * m;
    const std::size_t V = data.terms.size();
    const std::size_t D = data.docs.size();
    std::vector<double> log_a(D * m), log_na(D * m), log_s(D * m), log_ns(D * m);
    for (std::size_t k = 0; k < D * m; ++k) {
        log_a[k] = std::log(p.a[k]);
        log_na[k] = std::log1p(-p.a[k]);
        log_s[k] = std::log(p.s[k]);
        log_ns[k] = std::log1p(-p.s[k]);
    }
    std::vector<double> log_prior(S), log_lm(p.lm.size());
    for (std::size_t k = 0; k < S; ++k) log_prior[k] = std::log(p.prior[k]);
    for (std::size_t k = 0; k < p.lm.size(); ++k) log_lm[k] = std::log(p.lm[k]);

    gamma.assign(data.rows.size() * S, 0.0);
    std::vector<double> joint(S);
    double total_ll = 0.0;
    for (std::size_t r = 0; r < data.rows.size(); ++r) {
        const auto& row = data.rows[r];
        for (std::size_t i = 0; i < m; ++i) {
            double prefix = 0.0;  // positions before the last click
            double rest = 0.0;    // positions from the last click on, c = 1 form
            for (std::size_t j = 0; j < row.docs.size(); ++j) {
                const std::size_t di = row.docs[j] * m + i;
                const double term = row.clicks[j] ? log_a[di] + log_ns[di] : log_na[di];
                (static_cast<int>(j) < row.last ? prefix : rest) += term;
            }
            double q = 0.0;
            for (const auto& [t, n] : row.term_counts) q += n * log_lm[i * V + t];
            joint[m + i] = prefix + rest + q + log_prior[m + i];
            if (row.last >= 0) {
                const std::size_t dl = row.docs[static_cast<std::size_t>(row.last)] * m + i;
                joint[i] = prefix + log_a[dl] + log_s[dl] + row.background_ll + log_prior[i];
            } else {
                joint[i] = kNegInf;
            }
        }
        total_ll += log_sum_exp(joint);
        double peak = kNegInf;
        for (double v : joint) peak = std::max(peak, beta * v);
        double norm = 0.0;
        double* g = &gamma[r * S];
        for (std::size_t k = 0; k < S; ++k) {
            g[k] = joint[k] == kNegInf ? 0.0 : std::exp(beta * joint[k] - peak);
            norm += g[k];
        }
        for (std::size_t k = 0; k < S; ++k) g[k] /= norm;
    }
    return total_ll;
}

std::vector<double> intent_mass(const Gamma& gamma, std::size_t m) {
    std::vector<double> mass(m, 0.0);
    const std::size_t S = 2 * m;
    for (std::size_t r = 0; r * S < gamma.size(); ++r) {
        for (std::size_t i = 0; i < m; ++i) mass[i] += gamma[r * S + i] + gamma[r * S + m + i];
    }
    return mass;
}

// Drops intents with mass below threshold; keeps at least the heaviest one.
std::size_t prune(Params& p, Gamma& gamma, std::size_t V, double threshold) {
    const auto mass = intent_mass(gamma, p.m);
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < p.m; ++i) {
        if (mass[i] >= threshold) keep.push_back(i);
    }
    if (keep.empty()) {
        keep.push_back(static_cast<std::size_t>(std::max_element(mass.begin(), mass.end()) - mass.begin()));
    }
    if (keep.size() == p.m) return 0;
    const std::size_t old_m = p.m;
    const std::size_t m = keep.size();
    const std::size_t D = p.a.size() / old_m;
    Params q;
    q.m = m;
    q.a.resize(D * m);
    q.s.resize(D * m);
    q.prior.resize(2 * m);
    q.lm.resize(m * V);
    q.lm_floor.resize(m);
    double prior_total = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t i = keep[k];
        for (std::size_t d = 0; d < D; ++d) {
            q.a[d * m + k] = p.a[d * old_m + i];
            q.s[d * m + k] = p.s[d * old_m + i];
        }
        q.prior[k] = p.prior[i];
        q.prior[m + k] = p.prior[old_m + i];
        prior_total += q.prior[k] + q.prior[m + k];
        std::copy_n(&p.lm[i * V], V, &q.lm[k * V]);
        q.lm_floor[k] = p.lm_floor[i];
    }
    for (double& v : q.prior) v /= prior_total;

    const std::size_t rows = gamma.size() / (2 * old_m);
    Gamma g(rows * 2 * m);
    for (std::size_t r = 0; r < rows; ++r) {
        double norm = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            g[r * 2 * m + k] = gamma[r * 2 * old_m + keep[k]];
            g[r * 2 * m + m + k] = gamma[r * 2 * old_m + old_m + keep[k]];
            norm += g[r * 2 * m + k] + g[r * 2 * m + m + k];
        }
        for (std::size_t k = 0; k < 2 * m; ++k) {
            g[r * 2 * m + k] = norm > 0.0 ? g[r * 2 * m + k] / norm : 1.0 / static_cast<double>(2 * m);
        }
    }
    p = std::move(q);
    gamma = std::move(g);
    return old_m - m;
}

IntentMixtureModel to_model(const Dataset& data, const Params& p, const TrainConfig& cfg) {
    IntentMixtureModel model;
    model.q0 = data.q0;
    model.intents = p.m;
    model.state_prior = p.prior;
    model.default_attract = cfg.attract_prior.mode();
    model.default_satisfy = cfg.satisfy_prior.mode();
    const std::size_t m = p.m;
    for (std::size_t d = 0; d < data.docs.size(); ++d) {
        model.attract[data.docs[d]] = std::vector<double>(p.a.begin() + d * m, p.a.begin() + (d + 1) * m);
        model.satisfy[data.docs[d]] = std::vector<double>(p.s.begin() + d * m, p.s.begin() + (d + 1) * m);
    }
    const std::size_t V = data.terms.size();
    model.intent_lm.resize(m);
    model.reformulation.resize(m);
    model.lm_floor = p.lm_floor;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t t = 0; t < V; ++t) model.intent_lm[i][data.terms[t]] = p.lm[i * V + t];
    }
    return model;
}

Params from_model(const Dataset& data, const IntentMixtureModel& model) {
    Params p;
    const std::size_t m = model.intents;
    p.m = m;
    const std::size_t D = data.docs.size();
    const std::size_t V = data.terms.size();
    p.a.resize(D * m);
    p.s.resize(D * m);
    for (std::size_t d = 0; d < D; ++d) {
        for (std::size_t i = 0; i < m; ++i) {
            p.a[d * m + i] = model.attractiveness(data.docs[d], i);
            p.s[d * m + i] = model.satisfaction(data.docs[d], i);
        }
    }
    p.prior = model.state_prior;
    p.lm.resize(m * V);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t t = 0; t < V; ++t) p.lm[i * V + t] = model.term_probability(data.terms[t], i);
    }
    p.lm_floor = model.lm_floor;
    return p;
}

Gamma initial_gamma(const Dataset& data, const TrainConfig& cfg, std::size_t& m) {
    const std::size_t N = data.rows.size();
    if (cfg.init == InitStrategy::Random) {
        m = cfg.intents;
        if (m > N) throw InvalidArgument("more intents requested than interactions available");
        Rng rng(derive_seed(cfg.seed, "init:" + data.q0.raw));
        Gamma gamma(N * 2 * m, 0.0);
        for (std::size_t r = 0; r < N; ++r) {
            double norm = 0.0;
            for (std::size_t k = 0; k < 2 * m; ++k) {
                const bool feasible = k >= m || data.rows[r].last >= 0;
                gamma[r * 2 * m + k] = feasible ? 0.05 + rng.uniform() : 0.0;
                norm += gamma[r * 2 * m + k];
            }
            for (std::size_t k = 0; k < 2 * m; ++k) gamma[r * 2 * m + k] /= norm;
        }
        return gamma;
    }

    // Last-click grouping: largest groups first, ties by doc id.
    std::map<std::uint32_t, std::size_t> group_size;
    for (const auto& row : data.rows) {
        if (row.last >= 0) ++group_size[row.docs[static_cast<std::size_t>(row.last)]];
    }
    std::vector<std::pair<std::uint32_t, std::size_t>> groups(group_size.begin(), group_size.end());
    std::stable_sort(groups.begin(), groups.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
    m = std::max<std::size_t>(1, std::min(groups.size(), cfg.intents));
    if (m > N) throw InvalidArgument("more intents requested than interactions available");
    std::unordered_map<std::uint32_t, std::size_t> group_of;
    for (std::size_t g = 0; g < groups.size() && g < m; ++g) group_of[groups[g].first] = g;

    Gamma gamma(N * 2 * m, 0.0);
    std::size_t next = 0;
    for (std::size_t r = 0; r < N; ++r) {
        const auto& row = data.rows[r];
        std::size_t g;
        const auto it = row.last >= 0 ? group_of.find(row.docs[static_cast<std::size_t>(row.last)]) : group_of.end();
        if (it != group_of.end()) {
            g = it->second;
        } else {
            g = next;
            next = (next + 1) % m;
        }
        if (row.last >= 0) {
            gamma[r * 2 * m + g] = 0.5;
            gamma[r * 2 * m + m + g] = 0.5;
        } else {
            gamma[r * 2 * m + m + g] = 1.0;
        }
    }
    return gamma;
}

FitResult run_em(const Dataset& data, const std::vector<Interaction>& interactions, const BackgroundModel& background,
                 const TrainConfig& cfg, Params params) {
    const std::size_t N = data.rows.size();
    const std::size_t V = data.terms.size();
    const double prune_threshold = cfg.prune_fraction * static_cast<double>(N);

    FitReport report;
    report.q0 = data.q0.raw;
    report.interactions_used = N;

    Gamma gamma;
    std::size_t iteration = 0;
    bool converged = false;
    for (std::size_t phase = 0; phase < cfg.anneal_schedule.size() && !converged; ++phase) {
        const double temperature = cfg.anneal_schedule[phase];
        const bool final_phase = temperature == 1.0;
        std::size_t phase_iters = 0;
        while (iteration < cfg.max_iters && (final_phase || phase_iters < cfg.anneal_iters)) {
            const double ll = e_step(data, params, temperature, gamma) + log_prior(params, cfg);
            if (final_phase && !report.iterations.empty() && report.iterations.back().temperature == 1.0 &&
                std::abs(ll - report.iterations.back().log_posterior) < cfg.ll_tol) {
                report.iterations.push_back({temperature, ll});
                converged = true;
                break;
            }
            report.iterations.push_back({temperature, ll});
            params = m_step(data, gamma, params.m, cfg);
            if (cfg.observer) cfg.observer(iteration, to_model(data, params, cfg));
            ++iteration;
            ++phase_iters;
        }
        if (!final_phase && phase_iters > 0) {
            e_step(data, params, temperature, gamma);
            report.pruned_intents += prune(params, gamma, V, prune_threshold);
        }
        if (iteration >= cfg.max_iters) break;
    }
    report.reason = converged ? StopReason::Converged : StopReason::MaxIters;

    e_step(data, params, 1.0, gamma);
    report.pruned_intents += prune(params, gamma, V, prune_threshold);
    report.intent_mass = intent_mass(gamma, params.m);

    IntentMixtureModel model = to_model(data, params, cfg);
    model.reformulation = reformulation_probs(model, background, interactions, &report.empty_reformulation_intents);
    report.final_log_posterior = log_posterior(model, background, interactions, cfg);
    return {std::move(model), std::move(report)};
}

}  // namespace

std::vector<Interaction> cap_interactions(const std::vector<Interaction>& interactions, std::size_t cap,
                                          std::uint64_t seed) {
    if (interactions.size() <= cap) return interactions;
    std::vector<std::size_t> order(interactions.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    // Partial Fisher-Yates: the first `cap` slots form a uniform sample.
    for (std::size_t k = 0; k < cap; ++k) {
        std::swap(order[k], order[k + rng.below(order.size() - k)]);
    }
    order.resize(cap);
    std::sort(order.begin(), order.end());
    std::vector<Interaction> out;
    out.reserve(cap);
    for (std::size_t k : order) out.push_back(interactions[k]);
    return out;
}

IntentMixtureModel init_params(const std::vector<Interaction>& interactions, const TrainConfig& config) {
    config.validate();
    const Dataset data = prepare(interactions, nullptr);
    std::size_t m = 0;
    const Gamma gamma = initial_gamma(data, config, m);
    return to_model(data, m_step(data, gamma, m, config), config);
}

FitResult em_fit(const std::vector<Interaction>& interactions, const BackgroundModel& background,
                 const TrainConfig& config) {
    config.validate();
    const auto used = cap_interactions(interactions, config.interaction_cap, derive_seed(config.seed, "cap"));
    const Dataset data = prepare(used, &background);
    std::size_t m = 0;
    const Gamma gamma = initial_gamma(data, config, m);
    return run_em(data, used, background, config, m_step(data, gamma, m, config));
}

FitResult em_fit(const std::vector<Interaction>& interactions, const BackgroundModel& background,
                 const TrainConfig& config, const IntentMixtureModel& initial) {
    config.validate();
    const auto used = cap_interactions(interactions, config.interaction_cap, derive_seed(config.seed, "cap"));
    const Dataset data = prepare(used, &background);
    return run_em(data, used, background, config, from_model(data, initial));
}

double data_loglik(const IntentMixtureModel& model, const BackgroundModel& background,
                   const std::vector<Interaction>& interactions) {
    double ll = 0.0;
    for (const auto& o : interactions) ll += log_sum_exp(state_log_joint(model, background, o));
    return ll;
}

double log_posterior(const IntentMixtureModel& model, const BackgroundModel& background,
                     const std::vector<Interaction>& interactions, const TrainConfig& cfg) {
    double lp = data_loglik(model, background, interactions);
    const auto& pa = cfg.attract_prior;
    const auto& ps = cfg.satisfy_prior;
    for (const auto& [doc, values] : model.attract) {
        for (double a : values) lp += (pa.alpha - 1.0) * std::log(a) + (pa.beta - 1.0) * std::log1p(-a);
    }
    for (const auto& [doc, values] : model.satisfy) {
        for (double s : values) lp += (ps.alpha - 1.0) * std::log(s) + (ps.beta - 1.0) * std::log1p(-s);
    }
    for (const auto& lm : model.intent_lm) {
        for (const auto& [t, p] : lm) lp += (cfg.dirichlet_eta - 1.0) * std::log(p);
    }
    for (double p : model.state_prior) lp += cfg.state_pseudo_count * std::log(p);
    return lp;
}

std::vector<std::map<std::string, double>> reformulation_probs(const IntentMixtureModel& model,
                                                               const BackgroundModel& background,
                                                               const std::vector<Interaction>& interactions,
                                                               std::vector<std::size_t>* empty_intents) {
    const std::size_t m = model.intents;
    std::vector<std::map<std::string, double>> numer(m);
    std::vector<double> denom(m, 0.0);
    for (const auto& o : interactions) {
        const auto post = responsibilities(model, background, o, 1.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double g = post.at(1, i);
            denom[i] += g;
            if (g > 0.0) numer[i][o.q1.raw] += g;
        }
    }
    std::vector<std::map<std::string, double>> table(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (!(denom[i] > 0.0)) {
            if (empty_intents) empty_intents->push_back(i);
            continue;
        }
        for (const auto& [q, g] : numer[i]) table[i][q] = g / denom[i];
    }
    return table;
}

std::size_t select_intent_count(const std::vector<Interaction>& interactions, const BackgroundModel& background,
                                const TrainConfig& config, std::size_t max_intents, double holdout_fraction) {
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw InvalidArgument("holdout fraction must be in (0,1)");
    const auto used = cap_interactions(interactions, config.interaction_cap, derive_seed(config.seed, "cap"));
    std::vector<std::size_t> order(used.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, "holdout"));
    rng.shuffle(std::span<std::size_t>(order));
    const auto held = static_cast<std::size_t>(holdout_fraction * static_cast<double>(used.size()));
    if (held == 0 || held == used.size()) throw InvalidArgument("too few interactions for a held-out split");
    std::vector<Interaction> train, test;
    for (std::size_t k = 0; k < order.size(); ++k) (k < held ? test : train).push_back(used[order[k]]);

    std::size_t best = 1;
    double best_ll = kNegInf;
    for (std::size_t m = 1; m <= max_intents && m <= train.size(); ++m) {
        TrainConfig cfg = config;
        cfg.init = InitStrategy::Random;
        cfg.intents = m;
        const auto fit = em_fit(train, background, cfg);
        const double ll = data_loglik(fit.model, background, test);
        if (ll > best_ll) {
            best_ll = ll;
            best = m;
        }
    }
    return best;
}

TrainOutput train_all(const Corpus& corpus, const TrainConfig& config, unsigned threads) {
    config.validate();
    std::map<std::string, std::vector<Interaction>> groups;
    for (const auto& o : corpus.interactions) {
        if (corpus.training_queries.contains(o.q0.raw)) groups[o.q0.raw].push_back(o);
    }
    std::vector<const std::string*> keys;
    for (const auto& [q0, list] : groups) keys.push_back(&q0);

    std::vector<std::optional<FitResult>> results(keys.size());
    std::vector<std::string> errors(keys.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < keys.size(); k = next++) {
            TrainConfig cfg = config;
            cfg.seed = derive_seed(config.seed, *keys[k]);
            try {
                results[k] = em_fit(groups.at(*keys[k]), corpus.background, cfg);
            } catch (const Error& e) {
                errors[k] = e.what();
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(keys.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    TrainOutput out;
    for (std::size_t k = 0; k < keys.size(); ++k) {
        if (!results[k]) throw Error("training '" + *keys[k] + "' failed: " + errors[k]);
        out.models.emplace(*keys[k], std::move(results[k]->model));
        out.reports.push_back(std::move(results[k]->report));
    }
    return out;
}

void write_fit_reports(std::ostream& out, const std::vector<FitReport>& reports) {
    out << "#qsuggest-fit-report v1\n";
    for (const auto& r : reports) {
        out << "fit\t" << r.q0 << '\t' << r.interactions_used << '\t' << r.iterations.size() << '\t'
            << to_string(r.reason) << '\t' << format_double(r.final_log_posterior) << '\t' << r.intent_mass.size()
            << '\t' << r.pruned_intents << '\t';
        for (std::size_t i = 0; i < r.intent_mass.size(); ++i) out << (i ? "," : "") << format_double(r.intent_mass[i]);
        out << '\t';
        if (r.empty_reformulation_intents.empty()) out << '-';
        for (std::size_t i = 0; i < r.empty_reformulation_intents.size(); ++i) {
            out << (i ? "," : "") << r.empty_reformulation_intents[i];
        }
        out << '\n';
        for (std::size_t k = 0; k < r.iterations.size(); ++k) {
            out << "iter\t" << r.q0 << '\t' << k << '\t' << format_double(r.iterations[k].temperature) << '\t'
                << format_double(r.iterations[k].log_posterior) << '\n';
        }
    }
}

}  // namespace qsuggest
