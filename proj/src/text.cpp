#include "qsuggest/text.hpp"

#include <algorithm>
#include <fstream>

#include "qsuggest/error.hpp"

namespace qsuggest {

namespace {

bool is_space(char ch) {
    return ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\f' || ch == '\v';
}

}  // namespace

std::string fold_case(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char ch) {
        return (ch >= 'A' && ch <= 'Z') ? static_cast<char>(ch - 'A' + 'a') : static_cast<char>(ch);
    });
    return out;
}

Normalizer Normalizer::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open stopword file: " + path.string());
    std::set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        auto folded = fold_case(line);
        auto begin = std::find_if_not(folded.begin(), folded.end(), is_space);
        auto end = std::find_if_not(folded.rbegin(), folded.rend(), is_space).base();
        if (begin >= end || *begin == '#') continue;
        words.emplace(begin, end);
    }
    return Normalizer(std::move(words));
}

QueryText Normalizer::normalize(std::string_view raw) const {
    QueryText out;
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        if (!out.raw.empty()) out.raw.push_back(' ');
        out.raw += token;
        if (!stopwords_.contains(token)) out.terms.push_back(token);
        token.clear();
    };
    for (char ch : fold_case(raw)) {
        if (is_space(ch)) {
            flush();
        } else {
            token.push_back(ch);
        }
    }
    flush();
    return out;
}

bool is_token_prefix(const QueryText& prefix, const QueryText& query) {
    if (prefix.terms.size() > query.terms.size()) return false;
    return std::equal(prefix.terms.begin(), prefix.terms.end(), query.terms.begin());
}

}  // namespace qsuggest
