#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace mbti {

/// The four MBTI dichotomies, each treated as an independent binary task.
enum class Task { EI = 0, NS = 1, TF = 2, PJ = 3 };

inline constexpr std::array<Task, 4> kAllTasks{Task::EI, Task::NS, Task::TF, Task::PJ};

std::string_view task_name(Task task);
Task parse_task(std::string_view name);
/// Letter encoded as 0 / 1 for the task, e.g. EI -> ('E', 'I').
std::pair<char, char> task_letters(Task task);

/// Four binary labels. The first-listed letter of each dichotomy (E, N, T, P)
/// is 0 and the other (I, S, F, J) is 1.
struct LabelSet {
    std::uint8_t ei = 0;
    std::uint8_t ns = 0;
    std::uint8_t tf = 0;
    std::uint8_t pj = 0;

    int get(Task task) const;
    bool operator==(const LabelSet&) const = default;
};

/// Throws InvalidLabel unless `mbti` matches [EI][NS][TF][PJ] (any case).
LabelSet encode_labels(std::string_view mbti);
/// Upper-case 4-letter type string.
std::string decode_labels(const LabelSet& labels);

using TokenList = std::vector<std::string>;

inline constexpr std::array<std::string_view, 7> kSupportedLanguages{"en", "de", "es", "fr",
                                                                     "it", "nl", "pt"};
bool is_supported_language(std::string_view lang);

struct Document {
    std::string id;
    std::string author_id;
    std::string lang;
    std::string raw_text;
    TokenList tokens;
};

struct Record {
    Document doc;
    LabelSet labels;
};

/// Ordered, non-empty collection of labelled documents with unique ids.
class Dataset {
public:
    /// Throws SchemaError on an empty record list, duplicate ids or an
    /// unsupported language code.
    explicit Dataset(std::vector<Record> records);

    const std::vector<Record>& records() const { return records_; }
    std::vector<Record>& mutable_records() { return records_; }
    std::size_t size() const { return records_.size(); }
    const Record& operator[](std::size_t i) const { return records_[i]; }
    /// Most frequent language code; ties go to the alphabetically first.
    const std::string& lang() const { return lang_; }

    std::vector<int> labels(Task task) const;
    std::vector<std::string> ids() const;
    /// Index of a record by id; throws SchemaError when absent.
    std::size_t index_of(const std::string& id) const;

private:
    std::vector<Record> records_;
    std::string lang_;
    std::map<std::string, std::size_t> index_;
};

struct IngestOptions {
    /// Concatenate every record of an author into one document.
    bool per_author = false;
    /// When false, records without a valid label are kept with all-zero
    /// labels (for prediction on unlabelled text).
    bool require_labels = true;
};

struct IngestReport {
    std::size_t lines = 0;
    std::size_t accepted = 0;
    std::size_t skipped = 0;
    std::vector<std::string> warnings;
};

/// Reads a JSON-lines corpus. Records with missing or invalid labels are
/// skipped and counted; malformed lines produce a warning with the line
/// number. Throws IoError if the file cannot be read and SchemaError if no
/// valid record remains.
Dataset ingest_corpus(const std::filesystem::path& path, const IngestOptions& options = {},
                      IngestReport* report = nullptr);
Dataset ingest_corpus_text(std::string_view contents, const IngestOptions& options = {},
                           IngestReport* report = nullptr);

/// Stopword lists keyed by language code.
class StopwordRegistry {
public:
    StopwordRegistry() = default;
    /// Loads every stopwords.<lang>.txt file found in `dir`.
    static StopwordRegistry load_dir(const std::filesystem::path& dir);

    void add(const std::string& lang, std::unordered_set<std::string> words);
    /// Empty set for languages without a list.
    const std::unordered_set<std::string>& get(const std::string& lang) const;
    bool has(const std::string& lang) const { return lists_.count(lang) != 0; }

private:
    std::map<std::string, std::unordered_set<std::string>> lists_;
};

/// Lowercases, keeps letters, digits, whitespace and apostrophes (U+2019
/// folds to U+0027), drops every other codepoint, splits on whitespace and
/// removes stopwords.
TokenList preprocess_text(std::string_view raw, const std::unordered_set<std::string>& stopwords);

/// Fills Document::tokens for every record using the list for its language.
void preprocess_dataset(Dataset& ds, const StopwordRegistry& stopwords);

/// Per-letter counts; each dichotomy pair sums to the record count.
struct ClassCounts {
    std::size_t e = 0, i = 0, n = 0, s = 0, t = 0, f = 0, p = 0, j = 0;

    /// (count of label 0, count of label 1) for the task.
    std::pair<std::size_t, std::size_t> pair(Task task) const;
    std::size_t total() const { return e + i; }
};

ClassCounts class_distribution(const Dataset& ds);

struct SplitPlan {
    std::vector<std::string> dev_ids;  // sorted
    std::vector<std::string> test_ids; // sorted
    double dev_ratio = 0.3;
    std::uint64_t seed = 0;
};

struct FoldPlan {
    std::map<std::string, int> assignment;
    int k = 10;
    Task task = Task::EI;
    std::uint64_t seed = 0;

    /// Ids of fold `fold`, sorted.
    std::vector<std::string> members(int fold) const;
};

/// Stratified holdout over positions 0..labels.size()-1: returns the sorted
/// positions selected into the holdout, round(ratio * N) of them, allocated
/// across classes by largest remainder. `order_keys` breaks ties (ascending)
/// before the seeded shuffle so the result does not depend on input order.
std::vector<std::size_t> stratified_holdout(std::span<const int> labels,
                                            std::span<const std::string> order_keys, double ratio,
                                            std::uint64_t seed);

/// Stratified k-way fold assignment over positions; fold sizes differ by at
/// most one and per-fold class counts differ by at most one.
std::vector<int> stratified_folds(std::span<const int> labels,
                                  std::span<const std::string> order_keys, int k,
                                  std::uint64_t seed);

/// Stratified dev/test split followed by stratified folds over the test ids.
/// Throws ConfigError when N < k or dev_ratio is outside (0, 1).
std::pair<SplitPlan, FoldPlan> split_and_fold(const Dataset& ds, double dev_ratio, int k, Task task,
                                              std::uint64_t seed);

} // namespace mbti
