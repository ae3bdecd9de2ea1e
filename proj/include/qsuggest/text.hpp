#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace qsuggest {

/// A query in canonical form.
///
/// `raw` is the case-folded text with runs of whitespace collapsed to a
/// single space; it is the query's identity everywhere (candidate keys,
/// model keys, prefix matching). `terms` are the raw tokens minus stopwords.
struct QueryText {
    std::string raw;
    std::vector<std::string> terms;

    bool operator==(const QueryText&) const = default;
};

class Normalizer {
public:
    Normalizer() = default;
    explicit Normalizer(std::set<std::string> stopwords) : stopwords_(std::move(stopwords)) {}

    /// One stopword per line; blank lines and `#` comments ignored.
    static Normalizer from_file(const std::filesystem::path& path);

    QueryText normalize(std::string_view raw) const;

    const std::set<std::string>& stopwords() const { return stopwords_; }

private:
    std::set<std::string> stopwords_;
};

/// ASCII case folding. Bytes >= 0x80 pass through untouched.
std::string fold_case(std::string_view text);

/// True iff `query`'s token sequence starts with all of `prefix`'s tokens.
bool is_token_prefix(const QueryText& prefix, const QueryText& query);

}  // namespace qsuggest
