#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "qsuggest/corpus.hpp"
#include "qsuggest/model_io.hpp"
#include "qsuggest/ranker.hpp"

namespace httplib {
class Server;
}

namespace qsuggest {

inline constexpr int kServiceSchemaVersion = 1;
inline constexpr const char* kSchemaHeader = "X-Schema-Version";

struct ServiceConfig {
    std::int64_t idle_seconds = kSessionGapSeconds;
    std::size_t serp_size = kDefaultMaxSerpSize;
    RankerOptions ranker;
};

/// Status code plus a JSON body.
struct Response {
    int status = 200;
    std::string body;
};

/// Session store and request handlers, independent of the HTTP layer.
///
/// Models, background and index are read-only after construction. Each
/// session carries its own mutex, so events for one session are applied in
/// arrival order while distinct sessions proceed in parallel.
class SuggestService {
public:
    using Clock = std::function<std::int64_t()>;  // seconds

    SuggestService(ModelSet models, BackgroundModel background, CandidateIndex index, Normalizer normalizer,
                   ServiceConfig config = {}, Clock clock = {});

    /// POST /session, body {"query": "..."}.
    Response create_session(std::string_view body);
    /// POST /session/{id}/event, body {"type": "click"|"skip", "doc": "..."}.
    Response post_event(std::string_view id, std::string_view body);
    /// GET /suggest with session, prefix, variant and n parameters.
    Response suggest(const std::map<std::string, std::string>& params);
    /// GET /models/{q0}
    Response model(std::string_view q0) const;
    /// GET /health
    Response health();

    /// Drops sessions idle for longer than the configured limit.
    void evict_idle();
    std::size_t session_count();

private:
    struct Session {
        std::mutex mutex;
        std::string id;
        QueryText q0;
        Serp serp;
        std::vector<bool> clicks;
        std::vector<std::pair<std::string, std::string>> events;  // (type, doc)
        std::int64_t created = 0;
        std::int64_t last_active = 0;
    };

    std::shared_ptr<Session> find_session(std::string_view id);
    SuggestionContext context_of(const Session& session, bool full) const;
    const IntentMixtureModel* model_for(const QueryText& q0) const;

    ModelSet models_;
    BackgroundModel background_;
    CandidateIndex index_;
    Normalizer normalizer_;
    ServiceConfig config_;
    Clock clock_;

    std::mutex store_mutex_;
    std::map<std::string, std::shared_ptr<Session>, std::less<>> sessions_;
    std::uint64_t next_id_ = 1;
};

/// Wires the handlers to an httplib server. Every response carries the
/// schema version header.
void install_routes(httplib::Server& server, SuggestService& service);

}  // namespace qsuggest
