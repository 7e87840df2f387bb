#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbti/config.hpp"
#include "mbti/corpus.hpp"
#include "mbti/metrics.hpp"

namespace mbti {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

/// Runs one subcommand (stats, split, train, cv, predict, compare, explain,
/// report). `args` excludes the program name. Errors print a one-line
/// diagnostic to `err` and map to an exit code.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_command(int argc, const char* const* argv);

/// Reads {"id", "label", "p1"} prediction lines, keyed by id.
std::map<std::string, int> read_prediction_labels(const std::filesystem::path& path);

/// Truth labels from either prediction-style lines ({"id", "label"}) or
/// corpus lines ({"id", "mbti"}) scored on `task`.
std::map<std::string, int> read_truth_labels(const std::filesystem::path& path, Task task);

/// Pairs predictions of A and B against the truth on the ids all three
/// share; throws DataError when an id of the truth file is missing.
McNemarResult compare_prediction_files(const std::filesystem::path& a, const std::filesystem::path& b,
                                       const std::filesystem::path& truth, Task task);

nlohmann::json mcnemar_to_json(const McNemarResult& r);

/// The "stats" table: one "E 1423  I 5053" row per dichotomy.
std::string render_class_table(const ClassCounts& counts);

} // namespace mbti
