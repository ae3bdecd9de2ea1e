#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "qsuggest/text.hpp"

namespace qsuggest {

inline constexpr std::size_t kDefaultMaxSerpSize = 10;
inline constexpr std::int64_t kSessionGapSeconds = 300;

struct Serp {
    std::vector<std::string> doc_ids;

    std::size_t size() const { return doc_ids.size(); }
    std::optional<std::size_t> position_of(std::string_view doc) const;
    bool operator==(const Serp&) const = default;
};

struct ClickEvent {
    std::size_t position;  // 0-based
    std::int64_t time;
    bool operator==(const ClickEvent&) const = default;
};

/// One q0 -> SERP behaviour -> q1 unit.
struct Interaction {
    QueryText q0;
    Serp serp;
    std::vector<bool> clicks;  // one flag per SERP position
    QueryText q1;
    std::int64_t q0_time = 0;
    std::int64_t q1_time = 0;
    std::vector<ClickEvent> click_events;  // in arrival order

    /// 0-based index of the lowest clicked position, if any click.
    std::optional<std::size_t> last_click() const;
    std::size_t click_count() const;

    bool operator==(const Interaction&) const = default;
};

/// Throws InvalidArgument unless the interaction is internally consistent.
void validate(const Interaction& interaction, std::size_t max_serp = kDefaultMaxSerpSize);

// ---------------------------------------------------------------------------
// Raw event log

enum class EventType { Query, Click };

struct LogEvent {
    std::string user;
    std::int64_t time = 0;
    EventType type = EventType::Query;
    std::string query;              // Query events
    std::vector<std::string> serp;  // Query events
    std::string doc;                // Click events
};

/// Parses one log line. Returns nullopt for malformed records.
std::optional<LogEvent> parse_event(std::string_view line);
std::string format_event(const LogEvent& event);

struct SessionizeStats {
    std::size_t events = 0;
    std::size_t malformed = 0;          // unparsable, out of order, orphan or foreign clicks
    std::size_t dropped_same_query = 0; // q1 == q0 after normalization
    std::size_t dropped_bad_serp = 0;   // empty, oversized or duplicated SERP
    std::size_t sessions = 0;
};

struct SessionizeOptions {
    std::int64_t gap_seconds = kSessionGapSeconds;
    std::size_t max_serp = kDefaultMaxSerpSize;
};

/// Splits a time-ordered event stream into interactions.
///
/// Events are grouped by user (stable). A session ends when the time since
/// the user's previous event exceeds `gap_seconds`. Within a session each
/// query is paired with its SERP, clicks, and the next query.
std::vector<Interaction> sessionize(const std::vector<LogEvent>& events, const Normalizer& normalizer,
                                    const SessionizeOptions& options = {},
                                    SessionizeStats* stats = nullptr);

/// Reads a whole log. Malformed lines are counted in `stats`, not thrown.
std::vector<LogEvent> read_event_log(std::istream& in, SessionizeStats* stats = nullptr);

/// Emits each interaction as its own session; sessionize() of the result
/// reproduces the input.
std::vector<LogEvent> to_events(const std::vector<Interaction>& interactions);

/// q0 values with at least `min_count` interactions.
std::set<std::string> filter_training_queries(const std::vector<Interaction>& interactions,
                                              std::size_t min_count);

// ---------------------------------------------------------------------------
// Background model

struct BackgroundOptions {
    double query_pseudo_count = 0.5;  // epsilon added to every candidate count
    double term_pseudo_count = 0.5;   // Dirichlet pseudo-count per vocabulary term
    bool count_all_queries = false;   // also count q0 submissions toward P_g
};

struct BackgroundModel {
    std::map<std::string, double> query_prob;  // P_g over candidate vocabulary
    std::map<std::string, double> term_prob;   // P_g^lm
    double unseen_term_prob = 0.0;             // floor for out-of-vocabulary terms
    std::size_t total_interactions = 0;

    /// P_g(q); zero for queries outside the candidate vocabulary.
    double query_probability(std::string_view query) const;
    double term_probability(std::string_view term) const;
};

BackgroundModel build_background(const std::vector<Interaction>& interactions,
                                 const BackgroundOptions& options = {});

// ---------------------------------------------------------------------------
// Candidate index

struct Candidate {
    QueryText query;
    double prior = 0.0;  // P_g
};

/// Prefix-searchable suggestion candidates, sorted by raw text.
class CandidateIndex {
public:
    CandidateIndex() = default;
    explicit CandidateIndex(std::vector<Candidate> entries);

    static CandidateIndex from_background(const BackgroundModel& background, const Normalizer& normalizer);

    /// Entries whose case-folded raw text starts with the case-folded prefix.
    std::vector<const Candidate*> lookup(std::string_view prefix) const;
    const Candidate* find(std::string_view raw) const;

    const std::vector<Candidate>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

private:
    std::vector<Candidate> entries_;
};

// ---------------------------------------------------------------------------
// Corpus directory

inline constexpr std::string_view kInteractionsHeader = "#qsuggest-interactions v1";
inline constexpr std::string_view kBackgroundHeader = "#qsuggest-background v1";
inline constexpr std::string_view kCandidatesHeader = "#qsuggest-candidates v1";
inline constexpr std::string_view kTrainingQueriesHeader = "#qsuggest-training-queries v1";

void write_interactions(std::ostream& out, const std::vector<Interaction>& interactions);
std::vector<Interaction> read_interactions(std::istream& in, const Normalizer& normalizer);

void write_background(std::ostream& out, const BackgroundModel& background);
BackgroundModel read_background(std::istream& in);

void write_candidates(std::ostream& out, const CandidateIndex& index);
CandidateIndex read_candidates(std::istream& in, const Normalizer& normalizer);

/// Everything `ingest` produces.
struct Corpus {
    std::vector<Interaction> interactions;
    std::set<std::string> training_queries;
    BackgroundModel background;
    CandidateIndex index;
    std::set<std::string> stopwords;

    Normalizer normalizer() const { return Normalizer(stopwords); }
};

void save_corpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus load_corpus(const std::filesystem::path& dir);

/// Shortest round-trip decimal representation.
std::string format_double(double value);
/// Fixed 12 significant digits.
std::string format_prob(double value);
double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);
std::vector<std::string_view> split(std::string_view line, char sep);

}  // namespace qsuggest
