// Command-line front end: ingest, train, rank, eval, synth, world, serve.

#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"

#include "qsuggest/corpus.hpp"
#include "qsuggest/error.hpp"
#include "qsuggest/eval.hpp"
#include "qsuggest/model_io.hpp"
#include "qsuggest/ranker.hpp"
#include "qsuggest/service.hpp"
#include "qsuggest/synth.hpp"
#include "qsuggest/trainer.hpp"

namespace fs = std::filesystem;
using namespace qsuggest;

namespace {

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    return out;
}

std::vector<Interaction> read_log_interactions(const std::string& path, const Normalizer& normalizer,
                                               SessionizeStats& stats) {
    auto in = open_input(path);
    const auto events = read_event_log(in, &stats);
    return sessionize(events, normalizer, {}, &stats);
}

void print_stats(const SessionizeStats& s, std::size_t interactions) {
    std::cerr << "events " << s.events << ", malformed " << s.malformed << ", same-query " << s.dropped_same_query
              << ", bad serp " << s.dropped_bad_serp << ", sessions " << s.sessions << ", interactions "
              << interactions << '\n';
}

SuggestionContext parse_context(std::string text, const Normalizer& normalizer) {
    SuggestionContext ctx;
    if (text.empty()) return ctx;
    if (fs::is_regular_file(text)) {
        auto in = open_input(text);
        text.assign(std::istreambuf_iterator<char>(in), {});
    }
    const auto j = nlohmann::json::parse(text);
    if (j.contains("q0")) {
        ctx.q0 = normalizer.normalize(j.at("q0").get<std::string>());
        ctx.history = HistoryKind::QueryOnly;
    }
    if (j.contains("serp")) {
        ctx.serp.doc_ids = j.at("serp").get<std::vector<std::string>>();
        ctx.clicks.assign(ctx.serp.size(), false);
        for (const auto& doc : j.value("clicks", std::vector<std::string>{})) {
            const auto pos = ctx.serp.position_of(doc);
            if (!pos) throw InvalidArgument("clicked doc not in serp: " + doc);
            ctx.clicks[*pos] = true;
        }
        if (ctx.serp.size() > 0) ctx.history = HistoryKind::Full;
    }
    for (const auto& r : j.value("shown", std::vector<std::string>{})) ctx.shown.push_back(normalizer.normalize(r).raw);
    return ctx;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Context-sensitive query auto-completion"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Sessionize a query log into a corpus directory");
    std::string log_path, corpus_dir, stopwords_path;
    std::size_t min_count = 400;
    bool count_all = false;
    ingest->add_option("--log", log_path, "event log")->required();
    ingest->add_option("--out", corpus_dir, "corpus directory")->required();
    ingest->add_option("--min-count", min_count, "interactions needed for a training query")->capture_default_str();
    ingest->add_option("--stopwords", stopwords_path, "stopword list");
    ingest->add_flag("--count-all-queries", count_all, "count q0 submissions toward query frequencies");

    // train
    auto* train = app.add_subcommand("train", "Fit per-query intent models");
    std::string models_dir, intents = "auto", init = "lastclick";
    TrainConfig config;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    train->add_option("--corpus", corpus_dir, "corpus directory")->required();
    train->add_option("--out", models_dir, "model directory")->required();
    train->add_option("--intents", intents, "auto or an intent count")->capture_default_str();
    train->add_option("--init", init, "lastclick or random")->capture_default_str();
    train->add_option("--seed", config.seed)->capture_default_str();
    train->add_option("--max-iters", config.max_iters)->capture_default_str();
    train->add_option("--ll-tol", config.ll_tol)->capture_default_str();
    train->add_option("--cap", config.interaction_cap, "interactions per query")->capture_default_str();
    train->add_option("--threads", threads)->capture_default_str();

    // rank
    auto* rank = app.add_subcommand("rank", "Rank suggestions for one prefix");
    std::string prefix, context_json, variant_name = "fcntxdiv";
    std::size_t n = 10;
    rank->add_option("--models", models_dir)->required();
    rank->add_option("--corpus", corpus_dir)->required();
    rank->add_option("--prefix", prefix)->required();
    rank->add_option("--context", context_json, R"(JSON file or text: {"q0": ..., "serp": [...], "clicks": [...], "shown": [...]})");
    rank->add_option("--variant", variant_name)->capture_default_str();
    rank->add_option("-n", n)->capture_default_str();

    // eval
    auto* eval = app.add_subcommand("eval", "Replay a test log and report MRR@10 per variant");
    std::string test_path, variants = "baseline,qcntx,qcntxdiv,fcntx,fcntxdiv", report_path;
    std::size_t prefix_len = 3;
    eval->add_option("--models", models_dir)->required();
    eval->add_option("--corpus", corpus_dir)->required();
    eval->add_option("--test", test_path, "event log")->required();
    eval->add_option("--variants", variants)->capture_default_str();
    eval->add_option("--prefix-len", prefix_len)->capture_default_str();
    eval->add_option("--report", report_path, "JSON report path");
    eval->add_option("--threads", threads)->capture_default_str();

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic log from a world spec");
    std::string spec_path, out_path, truth_path;
    synth->add_option("--spec", spec_path)->required();
    synth->add_option("--out", out_path)->required();
    synth->add_option("--truth", truth_path);
    std::uint64_t synth_seed = 0;
    synth->add_option("--seed", synth_seed, "override the spec's seed");

    // world
    auto* world_cmd = app.add_subcommand("world", "Write a random world spec");
    RandomWorldOptions world_opts;
    world_cmd->add_option("--out", out_path)->required();
    world_cmd->add_option("--seed", world_opts.seed)->capture_default_str();
    world_cmd->add_option("--queries", world_opts.queries)->capture_default_str();
    world_cmd->add_option("--min-intents", world_opts.min_intents)->capture_default_str();
    world_cmd->add_option("--max-intents", world_opts.max_intents)->capture_default_str();
    world_cmd->add_option("--interactions", world_opts.interactions_per_query)->capture_default_str();
    world_cmd->add_option("--serp-size", world_opts.serp_size)->capture_default_str();
    world_cmd->add_flag("--null", world_opts.null_world, "no task continuation");

    // serve
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    std::string host = "127.0.0.1";
    int port = 8080;
    serve->add_option("--models", models_dir)->required();
    serve->add_option("--corpus", corpus_dir)->required();
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            Corpus corpus;
            if (!stopwords_path.empty()) corpus.stopwords = Normalizer::from_file(stopwords_path).stopwords();
            SessionizeStats stats;
            corpus.interactions = read_log_interactions(log_path, corpus.normalizer(), stats);
            print_stats(stats, corpus.interactions.size());
            corpus.training_queries = filter_training_queries(corpus.interactions, min_count);
            BackgroundOptions bg_opts;
            bg_opts.count_all_queries = count_all;
            corpus.background = build_background(corpus.interactions, bg_opts);
            corpus.index = CandidateIndex::from_background(corpus.background, corpus.normalizer());
            save_corpus(corpus_dir, corpus);
            std::cerr << corpus.training_queries.size() << " training queries, " << corpus.index.size()
                      << " candidates\n";
        } else if (*train) {
            const Corpus corpus = load_corpus(corpus_dir);
            if (init == "random") {
                config.init = InitStrategy::Random;
            } else if (init != "lastclick") {
                throw InvalidArgument("--init must be lastclick or random");
            }
            if (intents != "auto") config.intents = static_cast<std::size_t>(parse_int(intents));
            const TrainOutput out = train_all(corpus, config, threads);
            save_models(models_dir, out.models);
            auto report = open_output((fs::path(models_dir) / "fit_report.tsv").string());
            write_fit_reports(report, out.reports);
            std::cerr << out.models.size() << " models written\n";
        } else if (*rank) {
            const Corpus corpus = load_corpus(corpus_dir);
            const Normalizer normalizer = corpus.normalizer();
            const ModelSet models = load_models(models_dir, normalizer);
            const auto variant = parse_variant(variant_name);
            if (!variant) throw InvalidArgument("unknown variant " + variant_name);
            const SuggestionContext ctx = parse_context(context_json, normalizer);
            const auto ranked = rank_variant(models, corpus.background, corpus.index, fold_case(prefix), ctx,
                                             *variant, n);
            for (std::size_t k = 0; k < ranked.entries.size(); ++k) {
                std::cout << k + 1 << '\t' << ranked.entries[k].query << '\t'
                          << format_prob(ranked.entries[k].score) << '\n';
            }
        } else if (*eval) {
            const Corpus corpus = load_corpus(corpus_dir);
            const Normalizer normalizer = corpus.normalizer();
            const ModelSet models = load_models(models_dir, normalizer);
            SessionizeStats stats;
            const auto test = read_log_interactions(test_path, normalizer, stats);
            print_stats(stats, test.size());
            EvalOptions opts;
            opts.prefix_len = prefix_len;
            opts.threads = threads;
            opts.variants.clear();
            if (variants == "all") variants = "baseline,qcntx,qcntxdiv,fcntx,fcntxdiv";
            for (auto name : split(variants, ',')) {
                const auto v = parse_variant(name);
                if (!v) throw InvalidArgument("unknown variant " + std::string(name));
                opts.variants.push_back(*v);
            }
            const auto report = evaluate(test, models, corpus.background, corpus.index, opts);
            write_report_table(std::cout, report);
            if (!report_path.empty()) {
                auto out = open_output(report_path);
                write_report_json(out, report);
            }
        } else if (*synth) {
            WorldSpec world = load_world(fs::path(spec_path));
            if (synth->count("--seed")) world.seed = synth_seed;
            const SyntheticLog log = generate_log(world);
            auto out = open_output(out_path);
            write_event_log(out, log.events);
            if (!truth_path.empty()) {
                auto truth = open_output(truth_path);
                write_truth(truth, log.truth);
            }
            std::cerr << log.events.size() << " events written\n";
        } else if (*world_cmd) {
            auto out = open_output(out_path);
            save_world(out, random_world(world_opts));
        } else if (*serve) {
            const Corpus corpus = load_corpus(corpus_dir);
            const Normalizer normalizer = corpus.normalizer();
            SuggestService service(load_models(models_dir, normalizer), corpus.background, corpus.index, normalizer);
            httplib::Server server;
            install_routes(server, service);
            std::cerr << "listening on " << host << ':' << port << '\n';
            if (!server.listen(host, port)) throw Error("cannot listen on port " + std::to_string(port));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
