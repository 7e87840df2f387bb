#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mbti/corpus.hpp"
#include "mbti/models.hpp"

namespace mbti {

/// Flat "key = value" run configuration. Every key has a default; unknown
/// keys are rejected. Lines starting with '#' are comments.
class RunConfig {
public:
    RunConfig();

    /// Applies every assignment of a config file on top of the current values.
    void load_file(const std::filesystem::path& path);
    void load_text(std::string_view text, std::string_view origin = "<config>");
    /// Validates the key and the value's type; throws ConfigError.
    void set(const std::string& key, const std::string& value);
    /// Parses "key=value".
    void set_assignment(std::string_view assignment);

    const std::string& get(const std::string& key) const;
    std::string get_string(const std::string& key) const { return get(key); }
    long get_int(const std::string& key) const;
    std::uint64_t get_uint(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    bool is_set(const std::string& key) const;

    /// Tasks named by the "task" key (ALL expands to the four dichotomies).
    std::vector<Task> tasks() const;
    ModelSpec model_spec() const;

    /// Sorted "key = value" lines headed by the toolkit version.
    std::string render() const;

    static std::vector<std::string> known_keys();

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, bool> explicit_;
};

/// Default stopword directory: $MBTI_STOPWORDS_DIR, then
/// <executable>/../share/mbti/stopwords, then the bundled source data.
std::filesystem::path default_stopwords_dir();

std::string_view toolkit_version();

} // namespace mbti
