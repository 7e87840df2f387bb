#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mbti/corpus.hpp"
#include "mbti/sparse.hpp"

namespace mbti {

enum class Analyzer { Word, Char };

std::string_view analyzer_name(Analyzer a);
Analyzer parse_analyzer(std::string_view name);

struct NgramRange {
    int lo = 1;
    int hi = 1;
};

/// Word analyzer: contiguous token n-grams joined by a single space.
/// Char analyzer: codepoint n-grams over the tokens joined by single spaces.
std::vector<std::string> extract_ngrams(const TokenList& tokens, Analyzer analyzer, NgramRange range);

/// Term -> column map. Columns are assigned in lexicographic term order.
struct Vocabulary {
    std::vector<std::string> terms;
    std::vector<std::uint32_t> df;
    std::unordered_map<std::string, std::uint32_t> index;
    Analyzer analyzer = Analyzer::Word;
    NgramRange ngram_range;

    std::size_t size() const { return terms.size(); }
    /// -1 when the term is not in the vocabulary.
    long find(const std::string& term) const;
    void rebuild_index();
};

/// Smoothed TF-IDF: idf(t) = ln((1 + N) / (1 + df(t))) + 1, rows L2-normalised.
struct TfidfModel {
    Vocabulary vocab;
    std::vector<double> idf;
    std::size_t n_docs = 0;
    int min_df = 1;
    bool l2_norm = true;
};

/// Throws ConfigError on an invalid range and DataError ("fit error")
/// when no n-gram reaches min_df.
TfidfModel fit_tfidf(std::span<const TokenList> docs, Analyzer analyzer, NgramRange range,
                     int min_df);
SparseVector transform_tfidf(const TokenList& doc, const TfidfModel& model);
SparseMatrix transform_tfidf(std::span<const TokenList> docs, const TfidfModel& model);

/// TF-IDF vector built from raw term counts (column -> count); exposed for
/// the scale-invariance property.
SparseVector tfidf_from_counts(std::span<const std::pair<std::uint32_t, double>> counts,
                               const TfidfModel& model);

/// Univariate two-group ANOVA selection.
struct FeatureSelector {
    std::vector<double> f_scores;
    std::vector<std::uint32_t> selected; // ascending column indices
    std::size_t k = 0;

    /// Projects a row onto the selected columns (dimension = selected.size()).
    SparseVector apply(const SparseVector& row) const;
    SparseMatrix apply(const SparseMatrix& rows) const;
};

/// One-way ANOVA F per column: between-class mean square over within-class
/// mean square. Zero within- and between-class variance gives 0; zero
/// within-class variance alone gives +inf.
std::vector<double> anova_f_scores(const SparseMatrix& X, std::span<const int> y);

/// Keeps the min(k, V) columns with the largest F (ties to the lower index).
/// Throws ConfigError if y has a single class or k == 0.
FeatureSelector anova_f_select(const SparseMatrix& X, std::span<const int> y, std::size_t k);

struct VectorizerConfig {
    Analyzer analyzer = Analyzer::Word;
    NgramRange ngram_range{1, 2};
    int min_df = 2;
};

VectorizerConfig default_vectorizer(Analyzer analyzer);

struct TrainConfig;

/// Candidate k values 30000, 29000, ..., 1000.
std::vector<std::size_t> default_k_candidates();

struct KSearchResult {
    std::size_t best_k = 0;
    std::vector<std::pair<std::size_t, double>> scores; // (k, holdout macro-F1)
};

/// Fits TF-IDF, ANOVA selection and logistic regression on a stratified
/// 80/20 split of the development records and returns the candidate with
/// the highest holdout macro-F1 (ties to the smaller k).
KSearchResult search_k(std::span<const Record* const> dev, Task task,
                       std::span<const std::size_t> candidates, const VectorizerConfig& vec,
                       const TrainConfig& linear, std::uint64_t seed);

} // namespace mbti
