#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mbti/linear.hpp"
#include "mbti/models.hpp"
#include "mbti/sparse.hpp"

namespace mbti {

struct FeatureWeight {
    std::string term;
    double weight = 0.0;      // permutation weight (or coefficient when rounds = 0)
    double coefficient = 0.0; // logistic coefficient of the feature
};

/// Macro-F1 of the model on X minus the mean macro-F1 over `rounds`
/// shuffles of column `feature`. Constant columns return exactly 0.
/// Rows are shuffled in (label, contents) order, so the result does not
/// depend on row order. Each round uses an RNG keyed by (seed, feature, round).
double permutation_importance(const LogisticModel& model, const SparseMatrix& X, std::span<const int> y,
                              std::size_t feature, int rounds, std::uint64_t seed);
/// Every column of X.
std::vector<double> permutation_importances(const LogisticModel& model, const SparseMatrix& X, std::span<const int> y,
                                            int rounds, std::uint64_t seed);

/// Importance of a vocabulary column of a bag-of-words model; columns the
/// selector dropped cannot affect predictions and score exactly 0.
double term_importance(const BowClassifier& model, std::span<const Record* const> docs, Task task,
                       std::size_t vocab_column, int rounds, std::uint64_t seed);

struct TopFeatures {
    std::vector<FeatureWeight> positive; // n highest, descending
    std::vector<FeatureWeight> negative; // n lowest, in the same descending order
};

/// Ranks every selected feature by weight (descending, ties by term) and
/// returns both ends. rounds = 0 ranks raw coefficients. When n exceeds the
/// feature count both lists hold the full ranking and a warning is printed.
TopFeatures top_features(const BowClassifier& model, std::span<const Record* const> docs, Task task, std::size_t n,
                         int rounds, std::uint64_t seed);
TopFeatures top_features(const BowClassifier& model, std::span<const double> weights, std::size_t n);

struct HighlightSpan {
    std::size_t begin = 0; // token index
    std::size_t end = 0;   // one past the last token
    std::string term;
    double contribution = 0.0;
};

struct Highlight {
    std::vector<std::string> tokens;
    std::vector<HighlightSpan> spans;
    double bias = 0.0;
    double logit = 0.0;
    int predicted = 0;
};

/// Contribution of selected feature j is w_j x_j on the document's TF-IDF
/// vector, shared equally among the feature's occurrences; spans plus the
/// bias sum to the logit.
Highlight highlight_document(const BowClassifier& model, const TokenList& tokens);

/// Tokens with a non-zero contribution render as [token:+0.00] (multi-token
/// spans share their value equally among their tokens).
std::string render_highlight(const Highlight& h, Task task);

/// Table with a (Weight, task) column pair per task: n positive rows, a
/// "..." row, then n negative rows.
std::string render_weights_tsv(std::span<const Task> tasks, std::span<const TopFeatures> features);

} // namespace mbti
