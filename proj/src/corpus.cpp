#include "mbti/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mbti/error.hpp"
#include "mbti/random.hpp"
#include "mbti/unicode.hpp"

namespace mbti {

using json = nlohmann::json;

std::string_view task_name(Task task) {
    switch (task) {
    case Task::EI: return "EI";
    case Task::NS: return "NS";
    case Task::TF: return "TF";
    case Task::PJ: return "PJ";
    }
    return "??";
}

Task parse_task(std::string_view name) {
    std::string upper(name);
    for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (Task t : kAllTasks)
        if (task_name(t) == upper) return t;
    throw ConfigError(fmt::format("unknown task '{}'", name));
}

std::pair<char, char> task_letters(Task task) {
    switch (task) {
    case Task::EI: return {'E', 'I'};
    case Task::NS: return {'N', 'S'};
    case Task::TF: return {'T', 'F'};
    case Task::PJ: return {'P', 'J'};
    }
    return {'?', '?'};
}

int LabelSet::get(Task task) const {
    switch (task) {
    case Task::EI: return ei;
    case Task::NS: return ns;
    case Task::TF: return tf;
    case Task::PJ: return pj;
    }
    return 0;
}

LabelSet encode_labels(std::string_view mbti) {
    if (mbti.size() != 4) throw InvalidLabel(fmt::format("invalid MBTI type '{}'", mbti));
    std::array<std::uint8_t, 4> bits{};
    for (std::size_t pos = 0; pos < 4; ++pos) {
        const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(mbti[pos])));
        const auto [first, second] = task_letters(kAllTasks[pos]);
        if (c == first)
            bits[pos] = 0;
        else if (c == second)
            bits[pos] = 1;
        else
            throw InvalidLabel(fmt::format("invalid MBTI type '{}'", mbti));
    }
    return LabelSet{bits[0], bits[1], bits[2], bits[3]};
}

std::string decode_labels(const LabelSet& labels) {
    std::string out;
    for (Task t : kAllTasks) {
        const auto [first, second] = task_letters(t);
        out.push_back(labels.get(t) == 0 ? first : second);
    }
    return out;
}

bool is_supported_language(std::string_view lang) {
    return std::find(kSupportedLanguages.begin(), kSupportedLanguages.end(), lang) !=
           kSupportedLanguages.end();
}

Dataset::Dataset(std::vector<Record> records) : records_(std::move(records)) {
    if (records_.empty()) throw SchemaError("dataset has no records");
    std::map<std::string, std::size_t> lang_counts;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& doc = records_[i].doc;
        if (!is_supported_language(doc.lang))
            throw SchemaError(fmt::format("record '{}': unsupported language '{}'", doc.id, doc.lang));
        if (!index_.emplace(doc.id, i).second)
            throw SchemaError(fmt::format("duplicate record id '{}'", doc.id));
        ++lang_counts[doc.lang];
    }
    std::size_t best = 0;
    for (const auto& [lang, count] : lang_counts) {
        if (count > best) {
            best = count;
            lang_ = lang;
        }
    }
}

std::vector<int> Dataset::labels(Task task) const {
    std::vector<int> y;
    y.reserve(records_.size());
    for (const auto& r : records_) y.push_back(r.labels.get(task));
    return y;
}

std::vector<std::string> Dataset::ids() const {
    std::vector<std::string> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.doc.id);
    return out;
}

std::size_t Dataset::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw SchemaError(fmt::format("unknown record id '{}'", id));
    return it->second;
}

namespace {

std::optional<LabelSet> labels_from_json(const json& obj) {
    if (auto it = obj.find("mbti"); it != obj.end() && it->is_string()) {
        try {
            return encode_labels(it->get<std::string>());
        } catch (const InvalidLabel&) {
            return std::nullopt;
        }
    }
    if (auto it = obj.find("labels"); it != obj.end() && it->is_object()) {
        std::array<std::uint8_t, 4> bits{};
        for (std::size_t k = 0; k < 4; ++k) {
            auto f = it->find(std::string(task_name(kAllTasks[k])));
            if (f == it->end() || !f->is_number_integer()) return std::nullopt;
            const auto v = f->get<long long>();
            if (v != 0 && v != 1) return std::nullopt;
            bits[k] = static_cast<std::uint8_t>(v);
        }
        return LabelSet{bits[0], bits[1], bits[2], bits[3]};
    }
    return std::nullopt;
}

std::string string_field(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string())
        throw SchemaError(fmt::format("missing string field '{}'", key));
    return it->get<std::string>();
}

} // namespace

Dataset ingest_corpus_text(std::string_view contents, const IngestOptions& options,
                           IngestReport* report) {
    IngestReport local;
    IngestReport& rep = report ? *report : local;
    rep = IngestReport{};

    std::vector<Record> records;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= contents.size()) {
        auto end = contents.find('\n', start);
        if (end == std::string_view::npos) end = contents.size();
        std::string_view line = contents.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) {
            if (end == contents.size()) break;
            continue;
        }
        ++rep.lines;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            rep.warnings.push_back(fmt::format("line {}: malformed JSON ({})", line_no, e.what()));
            ++rep.skipped;
            continue;
        }
        if (!obj.is_object()) {
            rep.warnings.push_back(fmt::format("line {}: record is not a JSON object", line_no));
            ++rep.skipped;
            continue;
        }
        Record rec;
        try {
            rec.doc.id = string_field(obj, "id");
            rec.doc.author_id = obj.contains("author_id") && obj["author_id"].is_string()
                                    ? obj["author_id"].get<std::string>()
                                    : rec.doc.id;
            rec.doc.lang = string_field(obj, "lang");
            rec.doc.raw_text = string_field(obj, "text");
        } catch (const SchemaError& e) {
            rep.warnings.push_back(fmt::format("line {}: {}", line_no, e.what()));
            ++rep.skipped;
            continue;
        }
        if (!is_supported_language(rec.doc.lang)) {
            rep.warnings.push_back(
                fmt::format("line {}: unsupported language '{}'", line_no, rec.doc.lang));
            ++rep.skipped;
            continue;
        }
        auto labels = labels_from_json(obj);
        if (!labels && !options.require_labels) labels = LabelSet{};
        if (!labels) {
            rep.warnings.push_back(fmt::format("line {}: missing or invalid MBTI label", line_no));
            ++rep.skipped;
            continue;
        }
        rec.labels = *labels;
        records.push_back(std::move(rec));
        if (end == contents.size()) break;
    }

    if (options.per_author) {
        std::vector<Record> merged;
        std::map<std::string, std::size_t> by_author;
        std::vector<bool> conflicted;
        for (auto& rec : records) {
            auto [it, fresh] = by_author.emplace(rec.doc.author_id, merged.size());
            if (fresh) {
                Record m = rec;
                m.doc.id = rec.doc.author_id;
                merged.push_back(std::move(m));
                conflicted.push_back(false);
            } else {
                auto& m = merged[it->second];
                if (!(m.labels == rec.labels)) {
                    if (!conflicted[it->second])
                        rep.warnings.push_back(fmt::format(
                            "author '{}': conflicting labels across records", rec.doc.author_id));
                    conflicted[it->second] = true;
                }
                m.doc.raw_text += '\n';
                m.doc.raw_text += rec.doc.raw_text;
            }
        }
        std::vector<Record> kept;
        for (std::size_t i = 0; i < merged.size(); ++i) {
            if (conflicted[i])
                ++rep.skipped;
            else
                kept.push_back(std::move(merged[i]));
        }
        records = std::move(kept);
    } else {
        // duplicate ids are a schema problem for the line, not the file
        std::unordered_set<std::string> seen;
        std::vector<Record> kept;
        kept.reserve(records.size());
        for (auto& rec : records) {
            if (!seen.insert(rec.doc.id).second) {
                rep.warnings.push_back(fmt::format("duplicate id '{}' skipped", rec.doc.id));
                ++rep.skipped;
                continue;
            }
            kept.push_back(std::move(rec));
        }
        records = std::move(kept);
    }

    rep.accepted = records.size();
    if (records.empty()) throw SchemaError("corpus contains no valid records");
    return Dataset(std::move(records));
}

Dataset ingest_corpus(const std::filesystem::path& path, const IngestOptions& options,
                      IngestReport* report) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot read corpus file '{}'", path.string()));
    std::stringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError(fmt::format("error while reading '{}'", path.string()));
    return ingest_corpus_text(buffer.str(), options, report);
}

namespace {

std::string normalise(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (char32_t cp : unicode::decode(raw)) {
        if (cp == 0x2019) cp = U'\'';
        if (unicode::is_space(cp)) {
            out.push_back(' ');
            continue;
        }
        cp = unicode::to_lower(cp);
        if (unicode::is_letter(cp) || unicode::is_digit(cp) || cp == U'\'') unicode::append(out, cp);
    }
    return out;
}

} // namespace

TokenList preprocess_text(std::string_view raw, const std::unordered_set<std::string>& stopwords) {
    const std::string clean = normalise(raw);
    TokenList tokens;
    std::size_t i = 0;
    while (i < clean.size()) {
        while (i < clean.size() && clean[i] == ' ') ++i;
        std::size_t j = i;
        while (j < clean.size() && clean[j] != ' ') ++j;
        if (j > i) {
            std::string tok = clean.substr(i, j - i);
            if (!stopwords.count(tok)) tokens.push_back(std::move(tok));
        }
        i = j;
    }
    return tokens;
}

void preprocess_dataset(Dataset& ds, const StopwordRegistry& stopwords) {
    for (auto& rec : ds.mutable_records())
        rec.doc.tokens = preprocess_text(rec.doc.raw_text, stopwords.get(rec.doc.lang));
}

StopwordRegistry StopwordRegistry::load_dir(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir))
        throw IoError(fmt::format("stopword directory '{}' not found", dir.string()));
    StopwordRegistry reg;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        const auto name = file.filename().string();
        if (name.rfind("stopwords.", 0) != 0 || file.extension() != ".txt") continue;
        const auto lang = name.substr(10, name.size() - 14);
        std::ifstream in(file);
        if (!in) throw IoError(fmt::format("cannot read stopword file '{}'", file.string()));
        std::unordered_set<std::string> words;
        std::string line;
        while (std::getline(in, line)) {
            for (auto& tok : preprocess_text(line, {})) words.insert(std::move(tok));
        }
        reg.add(lang, std::move(words));
    }
    return reg;
}

void StopwordRegistry::add(const std::string& lang, std::unordered_set<std::string> words) {
    lists_[lang] = std::move(words);
}

const std::unordered_set<std::string>& StopwordRegistry::get(const std::string& lang) const {
    static const std::unordered_set<std::string> kEmpty;
    auto it = lists_.find(lang);
    return it == lists_.end() ? kEmpty : it->second;
}

std::pair<std::size_t, std::size_t> ClassCounts::pair(Task task) const {
    switch (task) {
    case Task::EI: return {e, i};
    case Task::NS: return {n, s};
    case Task::TF: return {t, f};
    case Task::PJ: return {p, j};
    }
    return {0, 0};
}

ClassCounts class_distribution(const Dataset& ds) {
    ClassCounts c;
    for (const auto& r : ds.records()) {
        (r.labels.ei ? c.i : c.e)++;
        (r.labels.ns ? c.s : c.n)++;
        (r.labels.tf ? c.f : c.t)++;
        (r.labels.pj ? c.j : c.p)++;
    }
    return c;
}

std::vector<std::string> FoldPlan::members(int fold) const {
    std::vector<std::string> out;
    for (const auto& [id, f] : assignment)
        if (f == fold) out.push_back(id);
    return out;
}

namespace {

// Positions of each class sorted by key, then shuffled with the seed.
std::array<std::vector<std::size_t>, 2> class_orders(std::span<const int> labels,
                                                     std::span<const std::string> keys,
                                                     std::uint64_t seed) {
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i] ? 1 : 0].push_back(i);
    for (int c = 0; c < 2; ++c) {
        auto& v = by_class[static_cast<std::size_t>(c)];
        std::sort(v.begin(), v.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
        Rng rng(derive_seed(seed, 0x5717, static_cast<std::uint64_t>(c)));
        rng.shuffle(v.begin(), v.end());
    }
    return by_class;
}

} // namespace

std::vector<std::size_t> stratified_holdout(std::span<const int> labels,
                                            std::span<const std::string> order_keys, double ratio,
                                            std::uint64_t seed) {
    const std::size_t n = labels.size();
    const auto target = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
    auto by_class = class_orders(labels, order_keys, seed);

    std::array<std::size_t, 2> take{};
    std::array<double, 2> remainder{};
    std::size_t assigned = 0;
    for (int c = 0; c < 2; ++c) {
        const double exact = ratio * static_cast<double>(by_class[static_cast<std::size_t>(c)].size());
        take[static_cast<std::size_t>(c)] = static_cast<std::size_t>(std::floor(exact));
        remainder[static_cast<std::size_t>(c)] = exact - std::floor(exact);
        assigned += take[static_cast<std::size_t>(c)];
    }
    // largest remainder; ties go to class 0
    while (assigned < target) {
        const std::size_t c = remainder[1] > remainder[0] ? 1 : 0;
        const std::size_t alt = 1 - c;
        std::size_t pick = take[c] < by_class[c].size() ? c : alt;
        ++take[pick];
        remainder[pick] = -1.0;
        ++assigned;
    }
    while (assigned > target) {
        const std::size_t c = take[0] >= take[1] ? 0 : 1;
        --take[c];
        --assigned;
    }

    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < 2; ++c)
        out.insert(out.end(), by_class[c].begin(), by_class[c].begin() + static_cast<std::ptrdiff_t>(take[c]));
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> stratified_folds(std::span<const int> labels,
                                  std::span<const std::string> order_keys, int k,
                                  std::uint64_t seed) {
    auto by_class = class_orders(labels, order_keys, derive_seed(seed, 0xF01D));
    std::vector<int> fold(labels.size(), 0);
    std::size_t pos = 0;
    for (const auto& members : by_class)
        for (std::size_t idx : members) fold[idx] = static_cast<int>(pos++ % static_cast<std::size_t>(k));
    return fold;
}

std::pair<SplitPlan, FoldPlan> split_and_fold(const Dataset& ds, double dev_ratio, int k, Task task,
                                              std::uint64_t seed) {
    if (!(dev_ratio > 0.0 && dev_ratio < 1.0))
        throw ConfigError(fmt::format("dev ratio {} outside (0, 1)", dev_ratio));
    if (k < 2) throw ConfigError(fmt::format("fold count {} must be at least 2", k));
    if (ds.size() < static_cast<std::size_t>(k))
        throw ConfigError(fmt::format("{} records cannot fill {} folds", ds.size(), k));

    const auto ids = ds.ids();
    const auto y = ds.labels(task);
    const auto dev_pos = stratified_holdout(y, ids, dev_ratio, seed);

    SplitPlan split;
    split.dev_ratio = dev_ratio;
    split.seed = seed;
    std::vector<bool> is_dev(ds.size(), false);
    for (auto p : dev_pos) is_dev[p] = true;
    std::vector<std::string> test_ids;
    std::vector<int> test_y;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (is_dev[i]) {
            split.dev_ids.push_back(ids[i]);
        } else {
            test_ids.push_back(ids[i]);
            test_y.push_back(y[i]);
        }
    }
    if (test_ids.size() < static_cast<std::size_t>(k))
        throw ConfigError(fmt::format("{} test records cannot fill {} folds", test_ids.size(), k));

    FoldPlan folds;
    folds.k = k;
    folds.task = task;
    folds.seed = seed;
    const auto assignment = stratified_folds(test_y, test_ids, k, seed);
    for (std::size_t i = 0; i < test_ids.size(); ++i) folds.assignment[test_ids[i]] = assignment[i];

    std::sort(split.dev_ids.begin(), split.dev_ids.end());
    std::sort(test_ids.begin(), test_ids.end());
    split.test_ids = std::move(test_ids);
    return {std::move(split), std::move(folds)};
}

} // namespace mbti
