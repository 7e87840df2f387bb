#include "mbti/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "mbti/error.hpp"

#ifndef MBTI_VERSION
#define MBTI_VERSION "0.0.0"
#endif
#ifndef MBTI_SOURCE_DATA_DIR
#define MBTI_SOURCE_DATA_DIR ""
#endif

namespace mbti {

std::string_view toolkit_version() { return MBTI_VERSION; }

namespace {

enum class Kind { String, Int, Uint, Double, Bool, Range, Choice };

struct KeySpec {
    const char* key;
    const char* value;
    Kind kind;
    const char* choices = nullptr; // '|' separated, Kind::Choice only
};

const std::vector<KeySpec>& key_specs() {
    static const std::vector<KeySpec> specs{
        {"model", "majority", Kind::Choice, "majority|bow-word|bow-char|lstm|encoder"},
        {"task", "EI", Kind::Choice, "EI|NS|TF|PJ|ALL"},
        {"seed", "13", Kind::Uint},
        {"input", "", Kind::String},
        {"output", "", Kind::String},
        {"stopwords_dir", "", Kind::String},
        {"per_author", "false", Kind::Bool},
        {"cv.k", "10", Kind::Int},
        {"cv.dev_ratio", "0.3", Kind::Double},
        {"cv.workers", "1", Kind::Int},
        {"inner_dev_ratio", "0.1", Kind::Double},
        {"bow.k", "0", Kind::Uint},
        {"bow.k_max", "30000", Kind::Uint},
        {"bow.k_min", "1000", Kind::Uint},
        {"bow.k_step", "1000", Kind::Uint},
        {"bow.word_ngram", "1,2", Kind::Range},
        {"bow.word_min_df", "2", Kind::Int},
        {"bow.char_ngram", "2,5", Kind::Range},
        {"bow.char_min_df", "5", Kind::Int},
        {"linear.lambda", "1", Kind::Double},
        {"linear.tol", "1e-4", Kind::Double},
        {"linear.max_iter", "200", Kind::Int},
        {"linear.memory", "10", Kind::Int},
        {"linear.balanced", "true", Kind::Bool},
        {"w2v.dim", "300", Kind::Int},
        {"w2v.window", "8", Kind::Int},
        {"w2v.negatives", "5", Kind::Int},
        {"w2v.epochs", "5", Kind::Int},
        {"w2v.lr", "0.025", Kind::Double},
        {"w2v.subsample", "1e-3", Kind::Double},
        {"w2v.min_count", "5", Kind::Int},
        {"w2v.workers", "1", Kind::Int},
        {"w2v.embeddings", "", Kind::String},
        {"lstm.hidden", "15", Kind::Int},
        {"lstm.layers", "2", Kind::Int},
        {"lstm.attention", "15", Kind::Int},
        {"lstm.dense", "64", Kind::Int},
        {"lstm.dropout", "0.2", Kind::Double},
        {"lstm.attention_first", "false", Kind::Bool},
        {"lstm.lr", "1e-3", Kind::Double},
        {"lstm.batch", "32", Kind::Int},
        {"lstm.max_epochs", "30", Kind::Int},
        {"lstm.patience", "3", Kind::Int},
        {"lstm.max_len", "64", Kind::Int},
        {"encoder.weights", "", Kind::String},
        {"encoder.vocab", "", Kind::String},
        {"encoder.config", "", Kind::String},
        {"encoder.max_tokens", "32", Kind::Int},
        {"encoder.pooling", "first", Kind::Choice, "first|mean"},
        {"encoder.frozen", "true", Kind::Bool},
        {"encoder.chunk_mean", "false", Kind::Bool},
        {"head.hidden", "512", Kind::Int},
        {"head.dropout", "0.5", Kind::Double},
        {"head.lr", "1e-3", Kind::Double},
        {"head.finetune_lr", "2e-5", Kind::Double},
        {"head.batch", "32", Kind::Int},
        {"head.max_epochs", "30", Kind::Int},
        {"head.patience", "3", Kind::Int},
        {"explain.rounds", "5", Kind::Int},
        {"explain.top_n", "10", Kind::Int},
        {"explain.documents", "20", Kind::Int},
    };
    return specs;
}

const KeySpec& spec_of(const std::string& key) {
    for (const auto& s : key_specs())
        if (key == s.key) return s;
    throw ConfigError(fmt::format("unknown configuration key '{}'", key));
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

bool parse_bool(const std::string& v, bool& out) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return out = true, true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return out = false, true;
    return false;
}

template <class T>
bool parse_number(const std::string& v, T& out) {
    const char* b = v.data();
    const char* e = v.data() + v.size();
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e;
}

bool parse_double(const std::string& v, double& out) {
    if (v.empty()) return false;
    char* end = nullptr;
    out = std::strtod(v.c_str(), &end);
    return end == v.c_str() + v.size() && std::isfinite(out);
}

bool parse_range(const std::string& v, int& lo, int& hi) {
    const auto comma = v.find(',');
    if (comma == std::string::npos) return false;
    return parse_number(trim(v.substr(0, comma)), lo) && parse_number(trim(v.substr(comma + 1)), hi) && lo >= 1 &&
           lo <= hi;
}

void validate(const KeySpec& s, const std::string& v) {
    bool ok = true;
    switch (s.kind) {
    case Kind::String: break;
    case Kind::Int: {
        long x;
        ok = parse_number(v, x);
        break;
    }
    case Kind::Uint: {
        std::uint64_t x;
        ok = parse_number(v, x);
        break;
    }
    case Kind::Double: {
        double x;
        ok = parse_double(v, x);
        break;
    }
    case Kind::Bool: {
        bool x;
        ok = parse_bool(v, x);
        break;
    }
    case Kind::Range: {
        int lo, hi;
        ok = parse_range(v, lo, hi);
        break;
    }
    case Kind::Choice: {
        ok = false;
        std::string_view choices = s.choices;
        std::size_t start = 0;
        while (start <= choices.size()) {
            auto bar = choices.find('|', start);
            if (bar == std::string_view::npos) bar = choices.size();
            if (choices.substr(start, bar - start) == v) ok = true;
            start = bar + 1;
        }
        break;
    }
    }
    if (!ok) throw ConfigError(fmt::format("invalid value '{}' for key '{}'", v, s.key));
}

} // namespace

RunConfig::RunConfig() {
    for (const auto& s : key_specs()) values_[s.key] = s.value;
}

std::vector<std::string> RunConfig::known_keys() {
    std::vector<std::string> out;
    for (const auto& s : key_specs()) out.emplace_back(s.key);
    std::sort(out.begin(), out.end());
    return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const auto& s = spec_of(key);
    std::string v = value;
    if (key == "task") std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::toupper(c); });
    validate(s, v);
    values_[key] = v;
    explicit_[key] = true;
}

void RunConfig::set_assignment(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError(fmt::format("expected key=value, got '{}'", assignment));
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::load_text(std::string_view text, std::string_view origin) {
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        try {
            set_assignment(t);
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("{}:{}: {}", origin, line_no, e.what()));
        }
    }
}

void RunConfig::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    load_text(ss.str(), path.string());
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(fmt::format("unknown configuration key '{}'", key));
    return it->second;
}

long RunConfig::get_int(const std::string& key) const {
    long v = 0;
    if (!parse_number(get(key), v)) throw ConfigError(fmt::format("key '{}' is not an integer", key));
    return v;
}

std::uint64_t RunConfig::get_uint(const std::string& key) const {
    std::uint64_t v = 0;
    if (!parse_number(get(key), v)) throw ConfigError(fmt::format("key '{}' is not a non-negative integer", key));
    return v;
}

double RunConfig::get_double(const std::string& key) const {
    double v = 0;
    if (!parse_double(get(key), v)) throw ConfigError(fmt::format("key '{}' is not a number", key));
    return v;
}

bool RunConfig::get_bool(const std::string& key) const {
    bool v = false;
    if (!parse_bool(get(key), v)) throw ConfigError(fmt::format("key '{}' is not a boolean", key));
    return v;
}

bool RunConfig::is_set(const std::string& key) const {
    auto it = explicit_.find(key);
    return it != explicit_.end() && it->second;
}

std::vector<Task> RunConfig::tasks() const {
    const auto& t = get("task");
    if (t == "ALL") return {kAllTasks.begin(), kAllTasks.end()};
    return {parse_task(t)};
}

ModelSpec RunConfig::model_spec() const {
    auto positive = [&](const char* key) {
        const long v = get_int(key);
        if (v < 1) throw ConfigError(fmt::format("key '{}' must be >= 1", key));
        return static_cast<int>(v);
    };
    auto fraction = [&](const char* key, bool allow_zero) {
        const double v = get_double(key);
        if (!(v < 1.0 && (allow_zero ? v >= 0.0 : v > 0.0)))
            throw ConfigError(fmt::format("key '{}' must lie in {}0, 1)", key, allow_zero ? "[" : "("));
        return v;
    };
    auto range = [&](const char* key) {
        int lo = 0, hi = 0;
        parse_range(get(key), lo, hi);
        return NgramRange{lo, hi};
    };

    ModelSpec s;
    s.kind = parse_model_kind(get("model"));
    s.word_vectorizer = {Analyzer::Word, range("bow.word_ngram"), positive("bow.word_min_df")};
    s.char_vectorizer = {Analyzer::Char, range("bow.char_ngram"), positive("bow.char_min_df")};
    s.k = get_uint("bow.k");
    const auto kmax = get_uint("bow.k_max"), kmin = get_uint("bow.k_min"), kstep = get_uint("bow.k_step");
    if (kmin < 1 || kmax < kmin || kstep < 1) throw ConfigError("bow.k_min/k_max/k_step must satisfy 1 <= min <= max, step >= 1");
    s.k_candidates.clear();
    for (auto k = kmax; k >= kmin; k -= kstep) {
        s.k_candidates.push_back(k);
        if (k < kmin + kstep) break;
    }

    s.linear.l2_lambda = get_double("linear.lambda");
    if (s.linear.l2_lambda < 0) throw ConfigError("linear.lambda must be >= 0");
    s.linear.tol = get_double("linear.tol");
    if (!(s.linear.tol > 0)) throw ConfigError("linear.tol must be > 0");
    s.linear.max_iter = positive("linear.max_iter");
    s.linear.memory = positive("linear.memory");
    s.linear.balanced = get_bool("linear.balanced");

    s.w2v.dim = positive("w2v.dim");
    s.w2v.window = positive("w2v.window");
    s.w2v.negatives = positive("w2v.negatives");
    s.w2v.epochs = positive("w2v.epochs");
    s.w2v.learning_rate = get_double("w2v.lr");
    s.w2v.subsample = get_double("w2v.subsample");
    s.w2v.min_count = positive("w2v.min_count");
    s.w2v.workers = positive("w2v.workers");
    s.w2v.seed = get_uint("seed");
    s.embeddings_path = get("w2v.embeddings");

    s.seqnet.input_dim = s.w2v.dim;
    s.seqnet.hidden = positive("lstm.hidden");
    s.seqnet.layers = positive("lstm.layers");
    s.seqnet.attention = positive("lstm.attention");
    s.seqnet.dense = positive("lstm.dense");
    s.seqnet.dropout = fraction("lstm.dropout", true);
    s.seqnet.attention_first = get_bool("lstm.attention_first");
    s.seq_train.adam.lr = fraction("lstm.lr", false);
    s.seq_train.batch_size = positive("lstm.batch");
    s.seq_train.max_epochs = positive("lstm.max_epochs");
    s.seq_train.patience = positive("lstm.patience");
    s.seq_train.max_len = static_cast<std::size_t>(positive("lstm.max_len"));

    s.encoder.weights_path = get("encoder.weights");
    s.encoder.vocab_path = get("encoder.vocab");
    s.encoder.config_path = get("encoder.config");
    s.encoder.max_tokens = static_cast<std::size_t>(positive("encoder.max_tokens"));
    if (s.encoder.max_tokens < 2) throw ConfigError("encoder.max_tokens must be >= 2");
    s.encoder.pooling = parse_pooling(get("encoder.pooling"));
    s.encoder.frozen = get_bool("encoder.frozen");
    s.encoder.chunk_mean = get_bool("encoder.chunk_mean");
    s.head.hidden = positive("head.hidden");
    s.head.dropout = fraction("head.dropout", true);
    s.head_train.adam.lr = fraction("head.lr", false);
    s.finetune_lr = fraction("head.finetune_lr", false);
    s.head_train.batch_size = positive("head.batch");
    s.head_train.max_epochs = positive("head.max_epochs");
    s.head_train.patience = positive("head.patience");

    s.inner_dev_ratio = fraction("inner_dev_ratio", true);
    return s;
}

std::string RunConfig::render() const {
    std::string out = fmt::format("# mbti {}\n", toolkit_version());
    for (const auto& [k, v] : values_) out += fmt::format("{} = {}\n", k, v);
    return out;
}

std::filesystem::path default_stopwords_dir() {
    namespace fs = std::filesystem;
    if (const char* env = std::getenv("MBTI_STOPWORDS_DIR"); env && *env) return env;
    std::error_code ec;
    const auto exe = fs::read_symlink("/proc/self/exe", ec);
    if (!ec) {
        const auto share = exe.parent_path().parent_path() / "share" / "mbti" / "stopwords";
        if (fs::is_directory(share, ec)) return share;
    }
    const fs::path bundled = fs::path(MBTI_SOURCE_DATA_DIR) / "stopwords";
    if (!std::string_view(MBTI_SOURCE_DATA_DIR).empty() && fs::is_directory(bundled, ec)) return bundled;
    return {};
}

} // namespace mbti
