#pragma once

#include <string>
#include <vector>

#include "qsuggest/corpus.hpp"
#include "qsuggest/user_model.hpp"

namespace qsuggest::testing {

inline Serp make_serp(std::initializer_list<const char*> docs) {
    Serp s;
    for (const char* d : docs) s.doc_ids.emplace_back(d);
    return s;
}

/// Model with uniform priors, given per-doc (a, s) rows shared by every intent.
inline IntentMixtureModel blank_model(std::string q0, std::size_t intents) {
    IntentMixtureModel m;
    m.q0 = Normalizer().normalize(q0);
    m.intents = intents;
    m.state_prior.assign(2 * intents, 1.0 / static_cast<double>(2 * intents));
    m.intent_lm.assign(intents, {{"x", 1.0}});
    m.lm_floor.assign(intents, 1e-6);
    m.reformulation.resize(intents);
    return m;
}

inline void set_doc(IntentMixtureModel& m, const std::string& doc, std::vector<double> a, std::vector<double> s) {
    m.attract[doc] = std::move(a);
    m.satisfy[doc] = std::move(s);
}

inline Interaction make_interaction(const std::string& q0, const Serp& serp, std::vector<bool> clicks,
                                    const std::string& q1, const Normalizer& normalizer = {}) {
    Interaction o;
    o.q0 = normalizer.normalize(q0);
    o.serp = serp;
    o.clicks = std::move(clicks);
    o.q1 = normalizer.normalize(q1);
    return o;
}

/// All click patterns of length J.
inline std::vector<std::vector<bool>> all_patterns(std::size_t J) {
    std::vector<std::vector<bool>> out;
    for (unsigned bits = 0; bits < (1u << J); ++bits) {
        std::vector<bool> p(J);
        for (std::size_t j = 0; j < J; ++j) p[j] = (bits >> j) & 1u;
        out.push_back(p);
    }
    return out;
}

}  // namespace qsuggest::testing

namespace qsuggest::testing {

/// P(clicks, c) for one intent by brute force over every latent
/// (attracted, satisfied) assignment of a cascade with per-position a and s.
inline double enumerate_cascade(const std::vector<double>& a, const std::vector<double>& s,
                                const std::vector<bool>& clicks, int c) {
    const std::size_t J = a.size();
    double total = 0.0;
    for (unsigned att = 0; att < (1u << J); ++att) {
        for (unsigned sat = 0; sat < (1u << J); ++sat) {
            double p = 1.0;
            std::vector<bool> seen(J, false);
            int continued = 1;
            bool stopped = false;
            for (std::size_t j = 0; j < J; ++j) {
                const bool aj = (att >> j) & 1u;
                const bool sj = (sat >> j) & 1u;
                p *= aj ? a[j] : 1.0 - a[j];
                p *= aj ? (sj ? s[j] : 1.0 - s[j]) : (sj ? 0.0 : 1.0);
                if (!stopped && aj) {
                    seen[j] = true;
                    if (sj) {
                        stopped = true;
                        continued = 0;
                    }
                }
            }
            if (continued == c && seen == clicks) total += p;
        }
    }
    return total;
}

}  // namespace qsuggest::testing
