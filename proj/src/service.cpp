#include "qsuggest/service.hpp"

#include <algorithm>
#include <chrono>

#include "httplib.h"
#include "json.hpp"

#include "qsuggest/error.hpp"

namespace qsuggest {

using nlohmann::ordered_json;

namespace {

Response json_response(int status, ordered_json body) {
    body["schema_version"] = kServiceSchemaVersion;
    return {status, body.dump()};
}

Response error_response(int status, const std::string& message) {
    return json_response(status, ordered_json{{"error", message}});
}

ordered_json posterior_json(const ContextPosterior& post) {
    return {{"p_continue", post.p_continue}, {"intent_dist", post.intent_dist}};
}

std::int64_t wall_seconds() {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace

SuggestService::SuggestService(ModelSet models, BackgroundModel background, CandidateIndex index,
                               Normalizer normalizer, ServiceConfig config, Clock clock)
    : models_(std::move(models)),
      background_(std::move(background)),
      index_(std::move(index)),
      normalizer_(std::move(normalizer)),
      config_(config),
      clock_(clock ? std::move(clock) : Clock(wall_seconds)) {}

const IntentMixtureModel* SuggestService::model_for(const QueryText& q0) const {
    const auto it = models_.find(q0.raw);
    return it == models_.end() ? nullptr : &it->second;
}

void SuggestService::evict_idle() {
    const std::int64_t now = clock_();
    std::lock_guard lock(store_mutex_);
    std::erase_if(sessions_, [&](const auto& entry) {
        std::lock_guard session_lock(entry.second->mutex);
        return now - entry.second->last_active > config_.idle_seconds;
    });
}

std::size_t SuggestService::session_count() {
    evict_idle();
    std::lock_guard lock(store_mutex_);
    return sessions_.size();
}

std::shared_ptr<SuggestService::Session> SuggestService::find_session(std::string_view id) {
    evict_idle();
    std::lock_guard lock(store_mutex_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

SuggestionContext SuggestService::context_of(const Session& s, bool full) const {
    SuggestionContext ctx;
    ctx.q0 = s.q0;
    ctx.history = full && s.serp.size() > 0 ? HistoryKind::Full : HistoryKind::QueryOnly;
    if (ctx.history == HistoryKind::Full) {
        ctx.serp = s.serp;
        ctx.clicks = s.clicks;
    }
    return ctx;
}

Response SuggestService::create_session(std::string_view body) {
    std::string text;
    try {
        const auto j = ordered_json::parse(body);
        text = j.at("query").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        return error_response(400, "body must be a JSON object with a string 'query'");
    }
    const QueryText q0 = normalizer_.normalize(text);
    if (q0.raw.empty()) return error_response(400, "empty query");

    auto session = std::make_shared<Session>();
    session->q0 = q0;
    session->created = session->last_active = clock_();

    const IntentMixtureModel* model = model_for(q0);
    if (model) {
        std::vector<std::pair<double, std::string>> ranked;
        for (const auto& [doc, values] : model->attract) {
            double marginal = 0.0;
            for (std::size_t i = 0; i < model->intents; ++i) marginal += model->intent_marginal(i) * values[i];
            ranked.emplace_back(marginal, doc);
        }
        std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
            return x.first != y.first ? x.first > y.first : x.second < y.second;
        });
        for (std::size_t k = 0; k < ranked.size() && k < config_.serp_size; ++k) {
            session->serp.doc_ids.push_back(ranked[k].second);
        }
        session->clicks.assign(session->serp.size(), false);
    }

    {
        std::lock_guard lock(store_mutex_);
        session->id = "s" + std::to_string(next_id_++);
        sessions_.emplace(session->id, session);
    }

    ordered_json out;
    out["session"] = session->id;
    out["q0"] = q0.raw;
    out["has_model"] = model != nullptr;
    out["serp"] = ordered_json::array();
    for (const auto& doc : session->serp.doc_ids) out["serp"].push_back({{"doc", doc}, {"title", doc}});
    if (model) out["posterior"] = posterior_json(intent_posterior(model, background_, context_of(*session, false)));
    return json_response(200, std::move(out));
}

Response SuggestService::post_event(std::string_view id, std::string_view body) {
    const auto session = find_session(id);
    if (!session) return error_response(404, "unknown session");

    std::string type;
    std::string doc;
    try {
        const auto j = ordered_json::parse(body);
        type = j.at("type").get<std::string>();
        doc = j.at("doc").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        return error_response(400, "body must be a JSON object with string 'type' and 'doc'");
    }
    if (type != "click" && type != "skip") return error_response(400, "event type must be click or skip");

    std::lock_guard lock(session->mutex);
    const auto position = session->serp.position_of(doc);
    if (!position) return error_response(409, "document not in the session SERP");
    session->clicks[*position] = type == "click";
    session->events.emplace_back(type, doc);
    session->last_active = clock_();

    ordered_json out;
    out["session"] = session->id;
    out["q0"] = session->q0.raw;
    out["clicks"] = ordered_json::array();
    for (std::size_t j = 0; j < session->serp.size(); ++j) {
        if (session->clicks[j]) out["clicks"].push_back(session->serp.doc_ids[j]);
    }
    out["events"] = session->events.size();
    if (const IntentMixtureModel* model = model_for(session->q0)) {
        out["posterior"] = posterior_json(intent_posterior(model, background_, context_of(*session, true)));
    }
    return json_response(200, std::move(out));
}

Response SuggestService::suggest(const std::map<std::string, std::string>& params) {
    auto param = [&](const char* key) -> const std::string* {
        const auto it = params.find(key);
        return it == params.end() ? nullptr : &it->second;
    };
    const std::string* variant_name = param("variant");
    const auto variant = parse_variant(variant_name ? *variant_name : "baseline");
    if (!variant) return error_response(400, "unknown variant");
    const std::string* prefix = param("prefix");
    if (!prefix || prefix->empty()) return error_response(400, "prefix is required");

    std::size_t n = 10;
    if (const std::string* text = param("n")) {
        try {
            const auto value = parse_int(*text);
            if (value < 0) return error_response(400, "n must be non-negative");
            n = static_cast<std::size_t>(value);
        } catch (const Error&) {
            return error_response(400, "n must be an integer");
        }
    }
    if (n > config_.ranker.pool) return error_response(400, "n exceeds the candidate pool size");

    SuggestionContext context;
    std::string session_id;
    const std::string* id = param("session");
    if (id) {
        const auto session = find_session(*id);
        if (!session) return error_response(404, "unknown session");
        std::lock_guard lock(session->mutex);
        session->last_active = clock_();
        context = context_of(*session, true);
        session_id = session->id;
    } else if (*variant != Variant::Baseline) {
        return error_response(404, "contextual variants require a session");
    }

    ordered_json out;
    out["variant"] = std::string(to_string(*variant));
    out["prefix"] = *prefix;
    if (!session_id.empty()) out["session"] = session_id;
    out["suggestions"] = ordered_json::array();
    out["step_posteriors"] = ordered_json::array();
    if (n > 0) {
        RankedSuggestions ranked;
        try {
            ranked = rank_variant(models_, background_, index_, *prefix, context, *variant, n, config_.ranker);
        } catch (const InvalidArgument& e) {
            return error_response(400, e.what());
        }
        for (const auto& e : ranked.entries) out["suggestions"].push_back({{"query", e.query}, {"score", e.score}});
        if (is_diversified(*variant)) {
            for (const auto& p : ranked.step_posteriors) out["step_posteriors"].push_back(posterior_json(p));
        } else if (!ranked.step_posteriors.empty()) {
            out["posterior"] = posterior_json(ranked.step_posteriors.front());
        }
    }
    return json_response(200, std::move(out));
}

Response SuggestService::model(std::string_view q0) const {
    const QueryText key = normalizer_.normalize(q0);
    const IntentMixtureModel* m = model_for(key);
    if (!m) return error_response(404, "no model for query");
    ordered_json out;
    out["q0"] = m->q0.raw;
    out["intents"] = m->intents;
    std::vector<double> stop;
    std::vector<double> cont;
    for (std::size_t i = 0; i < m->intents; ++i) {
        stop.push_back(m->prior(0, i));
        cont.push_back(m->prior(1, i));
    }
    out["state_prior"] = {{"c0", stop}, {"c1", cont}};
    out["default_attract"] = m->default_attract;
    out["default_satisfy"] = m->default_satisfy;
    out["attract"] = m->attract;
    out["satisfy"] = m->satisfy;
    out["lm_floor"] = m->lm_floor;
    out["intent_lm"] = m->intent_lm;
    out["reformulation"] = m->reformulation;
    return json_response(200, std::move(out));
}

Response SuggestService::health() {
    ordered_json out;
    out["status"] = "ok";
    out["models"] = models_.size();
    out["candidates"] = index_.size();
    out["sessions"] = session_count();
    return json_response(200, std::move(out));
}

void install_routes(httplib::Server& server, SuggestService& service) {
    auto send = [](httplib::Response& res, const Response& r) {
        res.status = r.status;
        res.set_header(kSchemaHeader, std::to_string(kServiceSchemaVersion));
        res.set_content(r.body, "application/json");
    };
    server.Post("/session", [&service, send](const httplib::Request& req, httplib::Response& res) {
        send(res, service.create_session(req.body));
    });
    server.Post(R"(/session/([^/]+)/event)", [&service, send](const httplib::Request& req, httplib::Response& res) {
        send(res, service.post_event(req.matches[1].str(), req.body));
    });
    server.Get("/suggest", [&service, send](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> params;
        for (const auto& [k, v] : req.params) params.emplace(k, v);
        send(res, service.suggest(params));
    });
    server.Get(R"(/models/(.+))", [&service, send](const httplib::Request& req, httplib::Response& res) {
        send(res, service.model(req.matches[1].str()));
    });
    server.Get("/health", [&service, send](const httplib::Request&, httplib::Response& res) {
        send(res, service.health());
    });
    server.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string message = "internal error";
        int status = 500;
        try {
            std::rethrow_exception(ep);
        } catch (const InvalidArgument& e) {
            status = 400;
            message = e.what();
        } catch (const std::exception& e) {
            message = e.what();
        }
        send(res, error_response(status, message));
    });
}

}  // namespace qsuggest
