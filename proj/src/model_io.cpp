#include "qsuggest/model_io.hpp"

#include <fstream>
#include <istream>
#include <optional>
#include <ostream>

#include "qsuggest/error.hpp"

namespace qsuggest {

void write_model(std::ostream& out, const IntentMixtureModel& m) {
    out << "model\t" << m.q0.raw << '\n';
    out << "intents\t" << m.intents << '\n';
    out << "default\t" << format_prob(m.default_attract) << '\t' << format_prob(m.default_satisfy) << '\n';
    for (int c = 0; c <= 1; ++c) {
        for (std::size_t i = 0; i < m.intents; ++i) {
            out << "prior\t" << c << '\t' << i << '\t' << format_prob(m.prior(c, i)) << '\n';
        }
    }
    auto write_table = [&](const char* tag, const auto& table) {
        for (const auto& [doc, values] : table) {
            out << tag << '\t' << doc;
            for (double v : values) out << '\t' << format_prob(v);
            out << '\n';
        }
    };
    write_table("attract", m.attract);
    write_table("satisfy", m.satisfy);
    for (std::size_t i = 0; i < m.intents; ++i) {
        out << "lmfloor\t" << i << '\t' << format_prob(m.lm_floor[i]) << '\n';
        for (const auto& [t, p] : m.intent_lm[i]) out << "lm\t" << i << '\t' << t << '\t' << format_prob(p) << '\n';
        for (const auto& [q, p] : m.reformulation[i]) {
            out << "reform\t" << i << '\t' << q << '\t' << format_prob(p) << '\n';
        }
    }
    out << "end\n";
}

void write_models(std::ostream& out, const ModelSet& models) {
    out << kModelsHeader << '\n';
    for (const auto& [q0, model] : models) write_model(out, model);
}

ModelSet read_models(std::istream& in, const Normalizer& normalizer) {
    std::string line;
    if (!std::getline(in, line) || line != kModelsHeader) throw FormatError("missing models header");
    ModelSet models;
    std::optional<IntentMixtureModel> current;
    std::size_t line_no = 1;
    auto intent_index = [&](std::string_view text) {
        const auto i = parse_int(text);
        if (!current || i < 0 || static_cast<std::size_t>(i) >= current->intents) {
            throw FormatError("intent index out of range on line " + std::to_string(line_no));
        }
        return static_cast<std::size_t>(i);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split(line, '\t');
        const auto tag = f[0];
        if (tag == "model") {
            if (current) throw FormatError("nested model record on line " + std::to_string(line_no));
            if (f.size() != 2) throw FormatError("bad model line");
            current.emplace();
            current->q0 = normalizer.normalize(f[1]);
            continue;
        }
        if (!current) throw FormatError("record outside a model block on line " + std::to_string(line_no));
        auto& m = *current;
        if (tag == "intents") {
            const auto n = parse_int(f.at(1));
            if (n <= 0) throw FormatError("intent count must be positive");
            m.intents = static_cast<std::size_t>(n);
            m.state_prior.assign(2 * m.intents, 0.0);
            m.intent_lm.assign(m.intents, {});
            m.lm_floor.assign(m.intents, 0.0);
            m.reformulation.assign(m.intents, {});
        } else if (tag == "default") {
            m.default_attract = parse_double(f.at(1));
            m.default_satisfy = parse_double(f.at(2));
        } else if (tag == "prior") {
            const auto c = parse_int(f.at(1));
            if (c != 0 && c != 1) throw FormatError("continuation flag must be 0 or 1");
            m.state_prior[IntentMixtureModel::state(static_cast<int>(c), intent_index(f.at(2)), m.intents)] =
                parse_double(f.at(3));
        } else if (tag == "attract" || tag == "satisfy") {
            if (f.size() != 2 + m.intents) throw FormatError("wrong arity on line " + std::to_string(line_no));
            std::vector<double> values;
            for (std::size_t k = 2; k < f.size(); ++k) values.push_back(parse_double(f[k]));
            (tag == "attract" ? m.attract : m.satisfy)[std::string(f[1])] = std::move(values);
        } else if (tag == "lmfloor") {
            m.lm_floor[intent_index(f.at(1))] = parse_double(f.at(2));
        } else if (tag == "lm") {
            m.intent_lm[intent_index(f.at(1))][std::string(f.at(2))] = parse_double(f.at(3));
        } else if (tag == "reform") {
            m.reformulation[intent_index(f.at(1))][std::string(f.at(2))] = parse_double(f.at(3));
        } else if (tag == "end") {
            check_model(m, 1e-9);
            const std::string key = m.q0.raw;
            models.emplace(key, std::move(m));
            current.reset();
        } else {
            throw FormatError("unknown model record '" + std::string(tag) + "' on line " + std::to_string(line_no));
        }
    }
    if (current) throw FormatError("unterminated model block");
    return models;
}

void save_models(const std::filesystem::path& dir, const ModelSet& models) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "models.tsv", std::ios::binary);
    if (!out) throw Error("cannot write models to " + dir.string());
    write_models(out, models);
}

ModelSet load_models(const std::filesystem::path& dir, const Normalizer& normalizer) {
    std::ifstream in(dir / "models.tsv", std::ios::binary);
    if (!in) throw Error("cannot read models from " + dir.string());
    return read_models(in, normalizer);
}

}  // namespace qsuggest
