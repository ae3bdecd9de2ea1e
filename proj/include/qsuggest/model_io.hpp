#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "qsuggest/text.hpp"
#include "qsuggest/user_model.hpp"

namespace qsuggest {

inline constexpr std::string_view kModelsHeader = "#qsuggest-models v1";

/// q0 raw text -> fitted model.
using ModelSet = std::map<std::string, IntentMixtureModel>;

/// Line-delimited records, one block per q0:
///
///     model   <q0>
///     intents <m>
///     default <attract> <satisfy>
///     prior   <c> <i> <p>
///     attract <doc> <p_0> ... <p_{m-1}>
///     satisfy <doc> <p_0> ... <p_{m-1}>
///     lmfloor <i> <p>
///     lm      <i> <term> <p>
///     reform  <i> <q1> <p>
///     end
///
/// Fields are tab-separated; probabilities carry 12 significant digits.
void write_model(std::ostream& out, const IntentMixtureModel& model);
void write_models(std::ostream& out, const ModelSet& models);
ModelSet read_models(std::istream& in, const Normalizer& normalizer);

void save_models(const std::filesystem::path& dir, const ModelSet& models);
ModelSet load_models(const std::filesystem::path& dir, const Normalizer& normalizer);

}  // namespace qsuggest
