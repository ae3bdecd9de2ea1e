#include "qsuggest/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "qsuggest/error.hpp"

namespace qsuggest {

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string format_double(double value) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, end);
}

std::string format_prob(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", value);
    return buf;
}

double parse_double(std::string_view text) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw FormatError("bad number: '" + std::string(text) + "'");
    }
    return value;
}

std::int64_t parse_int(std::string_view text) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw FormatError("bad integer: '" + std::string(text) + "'");
    }
    return value;
}

namespace {

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

void expect_header(std::istream& in, std::string_view header) {
    std::string line;
    if (!std::getline(in, line) || strip_cr(line) != header) {
        throw FormatError("expected header '" + std::string(header) + "'");
    }
}

bool serp_is_valid(const std::vector<std::string>& docs, std::size_t max_serp) {
    if (docs.empty() || docs.size() > max_serp) return false;
    std::vector<std::string_view> sorted(docs.begin(), docs.end());
    std::sort(sorted.begin(), sorted.end());
    return std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end() &&
           std::none_of(sorted.begin(), sorted.end(), [](auto d) { return d.empty(); });
}

bool same_query(const QueryText& a, const QueryText& b) {
    if (a.terms.empty() && b.terms.empty()) return a.raw == b.raw;
    return a.terms == b.terms;
}

}  // namespace

std::optional<std::size_t> Serp::position_of(std::string_view doc) const {
    for (std::size_t j = 0; j < doc_ids.size(); ++j) {
        if (doc_ids[j] == doc) return j;
    }
    return std::nullopt;
}

std::optional<std::size_t> Interaction::last_click() const {
    for (std::size_t j = clicks.size(); j-- > 0;) {
        if (clicks[j]) return j;
    }
    return std::nullopt;
}

std::size_t Interaction::click_count() const {
    return static_cast<std::size_t>(std::count(clicks.begin(), clicks.end(), true));
}

void validate(const Interaction& interaction, std::size_t max_serp) {
    if (!serp_is_valid(interaction.serp.doc_ids, max_serp)) {
        throw InvalidArgument("SERP must hold 1.." + std::to_string(max_serp) + " distinct documents");
    }
    if (interaction.clicks.size() != interaction.serp.size()) {
        throw InvalidArgument("click vector length " + std::to_string(interaction.clicks.size()) +
                              " does not match SERP length " + std::to_string(interaction.serp.size()));
    }
}

// ---------------------------------------------------------------------------

std::optional<LogEvent> parse_event(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto fields = split(line, '\t');
    if (fields.size() < 4 || fields[0].empty()) return std::nullopt;
    LogEvent event;
    event.user = std::string(fields[0]);
    try {
        event.time = parse_int(fields[1]);
    } catch (const FormatError&) {
        return std::nullopt;
    }
    if (fields[2] == "Q") {
        event.type = EventType::Query;
        event.query = std::string(fields[3]);
        for (std::size_t k = 4; k < fields.size(); ++k) {
            if (fields[k].empty()) return std::nullopt;
            event.serp.emplace_back(fields[k]);
        }
    } else if (fields[2] == "C") {
        if (fields.size() != 4 || fields[3].empty()) return std::nullopt;
        event.type = EventType::Click;
        event.doc = std::string(fields[3]);
    } else {
        return std::nullopt;
    }
    return event;
}

std::string format_event(const LogEvent& event) {
    std::string line = event.user + '\t' + std::to_string(event.time) + '\t';
    if (event.type == EventType::Query) {
        line += "Q\t" + event.query;
        for (const auto& doc : event.serp) line += '\t' + doc;
    } else {
        line += "C\t" + event.doc;
    }
    return line;
}

std::vector<LogEvent> read_event_log(std::istream& in, SessionizeStats* stats) {
    std::vector<LogEvent> events;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (auto event = parse_event(line)) {
            events.push_back(std::move(*event));
        } else if (stats) {
            ++stats->malformed;
        }
    }
    return events;
}

std::vector<Interaction> sessionize(const std::vector<LogEvent>& events, const Normalizer& normalizer,
                                    const SessionizeOptions& options, SessionizeStats* stats) {
    SessionizeStats local;
    SessionizeStats& st = stats ? *stats : local;
    st.events += events.size();

    // Stable grouping by user, users in order of first appearance.
    std::unordered_map<std::string, std::size_t> user_slot;
    std::vector<std::vector<const LogEvent*>> per_user;
    for (const auto& event : events) {
        auto [it, inserted] = user_slot.try_emplace(event.user, per_user.size());
        if (inserted) per_user.emplace_back();
        per_user[it->second].push_back(&event);
    }

    struct Pending {
        QueryText query;
        std::vector<std::string> serp;
        std::vector<bool> clicks;
        std::vector<ClickEvent> click_events;
        std::int64_t time = 0;
    };

    std::vector<Interaction> out;
    for (const auto& stream : per_user) {
        std::optional<std::int64_t> last_time;
        std::optional<Pending> current;
        for (const LogEvent* event : stream) {
            if (last_time && event->time < *last_time) {
                ++st.malformed;
                continue;
            }
            if (!last_time || event->time - *last_time > options.gap_seconds) {
                current.reset();
                ++st.sessions;
            }
            if (event->type == EventType::Click) {
                if (!current) {
                    ++st.malformed;
                    continue;
                }
                const auto it = std::find(current->serp.begin(), current->serp.end(), event->doc);
                if (it == current->serp.end()) {
                    ++st.malformed;
                    continue;
                }
                const auto pos = static_cast<std::size_t>(it - current->serp.begin());
                current->clicks[pos] = true;
                current->click_events.push_back({pos, event->time});
                last_time = event->time;
                continue;
            }

            QueryText query = normalizer.normalize(event->query);
            if (query.raw.empty()) {
                ++st.malformed;
                continue;
            }
            last_time = event->time;
            if (current) {
                if (!serp_is_valid(current->serp, options.max_serp)) {
                    ++st.dropped_bad_serp;
                } else if (same_query(current->query, query)) {
                    ++st.dropped_same_query;
                } else {
                    Interaction interaction;
                    interaction.q0 = current->query;
                    interaction.serp.doc_ids = current->serp;
                    interaction.clicks = current->clicks;
                    interaction.q1 = query;
                    interaction.q0_time = current->time;
                    interaction.q1_time = event->time;
                    interaction.click_events = current->click_events;
                    out.push_back(std::move(interaction));
                }
            }
            current = Pending{std::move(query), event->serp, std::vector<bool>(event->serp.size(), false), {},
                              event->time};
        }
    }
    return out;
}

std::vector<LogEvent> to_events(const std::vector<Interaction>& interactions) {
    std::vector<LogEvent> events;
    for (std::size_t k = 0; k < interactions.size(); ++k) {
        const auto& o = interactions[k];
        const std::string user = "u" + std::to_string(k);
        LogEvent q0{user, o.q0_time, EventType::Query, o.q0.raw, o.serp.doc_ids, {}};
        events.push_back(std::move(q0));
        for (const auto& click : o.click_events) {
            events.push_back({user, click.time, EventType::Click, {}, {}, o.serp.doc_ids[click.position]});
        }
        if (o.click_events.empty()) {
            // Interactions built without timings: clicks in SERP order at q0 time.
            for (std::size_t j = 0; j < o.clicks.size(); ++j) {
                if (o.clicks[j]) events.push_back({user, o.q0_time, EventType::Click, {}, {}, o.serp.doc_ids[j]});
            }
        }
        events.push_back({user, o.q1_time, EventType::Query, o.q1.raw, {}, {}});
    }
    return events;
}

std::set<std::string> filter_training_queries(const std::vector<Interaction>& interactions,
                                              std::size_t min_count) {
    if (min_count < 1) throw InvalidArgument("min_count must be >= 1");
    std::map<std::string, std::size_t> counts;
    for (const auto& o : interactions) ++counts[o.q0.raw];
    std::set<std::string> kept;
    for (const auto& [q0, n] : counts) {
        if (n >= min_count) kept.insert(q0);
    }
    return kept;
}

// ---------------------------------------------------------------------------

double BackgroundModel::query_probability(std::string_view query) const {
    const auto it = query_prob.find(std::string(query));
    return it == query_prob.end() ? 0.0 : it->second;
}

double BackgroundModel::term_probability(std::string_view term) const {
    const auto it = term_prob.find(std::string(term));
    return it == term_prob.end() ? unseen_term_prob : it->second;
}

BackgroundModel build_background(const std::vector<Interaction>& interactions, const BackgroundOptions& options) {
    if (interactions.empty()) throw InvalidArgument("build_background: no interactions");
    std::map<std::string, double> query_counts;
    std::map<std::string, double> term_counts;
    auto count = [&](const QueryText& q) {
        query_counts[q.raw] += 1.0;
        for (const auto& t : q.terms) term_counts[t] += 1.0;
    };
    for (const auto& o : interactions) {
        count(o.q1);
        if (options.count_all_queries) count(o.q0);
    }
    if (term_counts.empty()) throw InvalidArgument("build_background: empty term vocabulary");

    BackgroundModel model;
    model.total_interactions = interactions.size();

    double query_total = 0.0;
    for (const auto& [q, c] : query_counts) query_total += c + options.query_pseudo_count;
    for (const auto& [q, c] : query_counts) model.query_prob[q] = (c + options.query_pseudo_count) / query_total;

    double term_total = 0.0;
    for (const auto& [t, c] : term_counts) term_total += c + options.term_pseudo_count;
    for (const auto& [t, c] : term_counts) model.term_prob[t] = (c + options.term_pseudo_count) / term_total;
    model.unseen_term_prob = options.term_pseudo_count / term_total;
    return model;
}

// ---------------------------------------------------------------------------

CandidateIndex::CandidateIndex(std::vector<Candidate> entries) : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(),
              [](const Candidate& a, const Candidate& b) { return a.query.raw < b.query.raw; });
    const auto dup = std::adjacent_find(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
        return a.query.raw == b.query.raw;
    });
    if (dup != entries_.end()) throw InvalidArgument("duplicate candidate: " + dup->query.raw);
}

CandidateIndex CandidateIndex::from_background(const BackgroundModel& background, const Normalizer& normalizer) {
    std::vector<Candidate> entries;
    entries.reserve(background.query_prob.size());
    for (const auto& [raw, p] : background.query_prob) entries.push_back({normalizer.normalize(raw), p});
    return CandidateIndex(std::move(entries));
}

std::vector<const Candidate*> CandidateIndex::lookup(std::string_view prefix) const {
    const std::string folded = fold_case(prefix);
    std::vector<const Candidate*> out;
    auto it = std::lower_bound(entries_.begin(), entries_.end(), folded,
                               [](const Candidate& c, const std::string& p) { return c.query.raw < p; });
    for (; it != entries_.end() && it->query.raw.starts_with(folded); ++it) out.push_back(&*it);
    return out;
}

const Candidate* CandidateIndex::find(std::string_view raw) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), raw,
                               [](const Candidate& c, std::string_view p) { return c.query.raw < p; });
    return (it != entries_.end() && it->query.raw == raw) ? &*it : nullptr;
}

// ---------------------------------------------------------------------------

void write_interactions(std::ostream& out, const std::vector<Interaction>& interactions) {
    out << kInteractionsHeader << '\n';
    for (const auto& o : interactions) {
        out << o.q0.raw << '\t' << o.q1.raw << '\t' << o.q0_time << '\t' << o.q1_time << '\t';
        for (bool k : o.clicks) out << (k ? '1' : '0');
        out << '\t';
        if (o.click_events.empty()) out << '-';
        for (std::size_t e = 0; e < o.click_events.size(); ++e) {
            if (e) out << ',';
            out << o.click_events[e].position << '@' << o.click_events[e].time;
        }
        for (const auto& doc : o.serp.doc_ids) out << '\t' << doc;
        out << '\n';
    }
}

std::vector<Interaction> read_interactions(std::istream& in, const Normalizer& normalizer) {
    expect_header(in, kInteractionsHeader);
    std::vector<Interaction> interactions;
    std::string line;
    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto f = split(line, '\t');
        if (f.size() < 7) throw FormatError("interaction record has too few fields");
        Interaction o;
        o.q0 = normalizer.normalize(f[0]);
        o.q1 = normalizer.normalize(f[1]);
        o.q0_time = parse_int(f[2]);
        o.q1_time = parse_int(f[3]);
        for (char ch : f[4]) {
            if (ch != '0' && ch != '1') throw FormatError("bad click flags");
            o.clicks.push_back(ch == '1');
        }
        if (f[5] != "-") {
            for (auto item : split(f[5], ',')) {
                const auto at = item.find('@');
                if (at == std::string_view::npos) throw FormatError("bad click event");
                o.click_events.push_back({static_cast<std::size_t>(parse_int(item.substr(0, at))),
                                          parse_int(item.substr(at + 1))});
            }
        }
        for (std::size_t k = 6; k < f.size(); ++k) o.serp.doc_ids.emplace_back(f[k]);
        validate(o, std::max(kDefaultMaxSerpSize, o.serp.size()));
        for (const auto& e : o.click_events) {
            if (e.position >= o.serp.size() || !o.clicks[e.position]) throw FormatError("click event outside SERP");
        }
        interactions.push_back(std::move(o));
    }
    return interactions;
}

void write_background(std::ostream& out, const BackgroundModel& background) {
    out << kBackgroundHeader << '\n';
    out << "meta\ttotal_interactions\t" << background.total_interactions << '\n';
    out << "meta\tunseen_term_prob\t" << format_double(background.unseen_term_prob) << '\n';
    for (const auto& [q, p] : background.query_prob) out << "query\t" << q << '\t' << format_double(p) << '\n';
    for (const auto& [t, p] : background.term_prob) out << "term\t" << t << '\t' << format_double(p) << '\n';
}

BackgroundModel read_background(std::istream& in) {
    expect_header(in, kBackgroundHeader);
    BackgroundModel model;
    std::string line;
    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto f = split(line, '\t');
        if (f.size() != 3) throw FormatError("background record must have 3 fields");
        if (f[0] == "meta") {
            if (f[1] == "total_interactions") {
                model.total_interactions = static_cast<std::size_t>(parse_int(f[2]));
            } else if (f[1] == "unseen_term_prob") {
                model.unseen_term_prob = parse_double(f[2]);
            }
        } else if (f[0] == "query") {
            model.query_prob[std::string(f[1])] = parse_double(f[2]);
        } else if (f[0] == "term") {
            model.term_prob[std::string(f[1])] = parse_double(f[2]);
        } else {
            throw FormatError("unknown background record: " + std::string(f[0]));
        }
    }
    return model;
}

void write_candidates(std::ostream& out, const CandidateIndex& index) {
    out << kCandidatesHeader << '\n';
    for (const auto& c : index.entries()) out << c.query.raw << '\t' << format_double(c.prior) << '\n';
}

CandidateIndex read_candidates(std::istream& in, const Normalizer& normalizer) {
    expect_header(in, kCandidatesHeader);
    std::vector<Candidate> entries;
    std::string line;
    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto f = split(line, '\t');
        if (f.size() != 2) throw FormatError("candidate record must have 2 fields");
        entries.push_back({normalizer.normalize(f[0]), parse_double(f[1])});
    }
    return CandidateIndex(std::move(entries));
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    return in;
}

}  // namespace

void save_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
    std::filesystem::create_directories(dir);
    {
        auto out = open_out(dir / "interactions.tsv");
        write_interactions(out, corpus.interactions);
    }
    {
        auto out = open_out(dir / "background.tsv");
        write_background(out, corpus.background);
    }
    {
        auto out = open_out(dir / "candidates.tsv");
        write_candidates(out, corpus.index);
    }
    {
        auto out = open_out(dir / "training_queries.tsv");
        out << kTrainingQueriesHeader << '\n';
        for (const auto& q : corpus.training_queries) out << q << '\n';
    }
    {
        auto out = open_out(dir / "stopwords.txt");
        for (const auto& w : corpus.stopwords) out << w << '\n';
    }
}

Corpus load_corpus(const std::filesystem::path& dir) {
    Corpus corpus;
    {
        auto in = open_in(dir / "stopwords.txt");
        std::string line;
        while (std::getline(in, line)) {
            line = strip_cr(line);
            if (!line.empty()) corpus.stopwords.insert(line);
        }
    }
    const Normalizer normalizer = corpus.normalizer();
    {
        auto in = open_in(dir / "interactions.tsv");
        corpus.interactions = read_interactions(in, normalizer);
    }
    {
        auto in = open_in(dir / "background.tsv");
        corpus.background = read_background(in);
    }
    {
        auto in = open_in(dir / "candidates.tsv");
        corpus.index = read_candidates(in, normalizer);
    }
    {
        auto in = open_in(dir / "training_queries.tsv");
        expect_header(in, kTrainingQueriesHeader);
        std::string line;
        while (std::getline(in, line)) {
            line = strip_cr(line);
            if (!line.empty()) corpus.training_queries.insert(line);
        }
    }
    return corpus;
}

}  // namespace qsuggest
