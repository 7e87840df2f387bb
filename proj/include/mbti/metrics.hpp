#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>

namespace mbti {

/// Confusion counts with label 1 as the positive class.
struct ConfusionCounts {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;

    std::size_t total() const { return tp + tn + fp + fn; }
};

ConfusionCounts confusion(std::span<const int> y_true, std::span<const int> y_pred);

// 0/0 is defined as 0 in all three.
double precision(const ConfusionCounts& c);
double recall(const ConfusionCounts& c);
double f1_score(const ConfusionCounts& c);
double accuracy(const ConfusionCounts& c);

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct MetricsReport {
    std::array<ClassScores, 2> per_class{}; // index = class label
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double weighted_f1 = 0.0;
    ConfusionCounts counts;
};

/// Each class is scored as the positive class in turn. Throws ConfigError
/// on empty or mismatched inputs.
MetricsReport compute_metrics(std::span<const int> y_true, std::span<const int> y_pred);

double macro_f1(std::span<const int> y_true, std::span<const int> y_pred);

/// Constant predictor of the modal training class (ties predict 0).
class MajorityBaseline {
public:
    static MajorityBaseline fit(std::span<const int> train_labels);
    int label() const { return label_; }
    int predict() const { return label_; }

private:
    explicit MajorityBaseline(int label) : label_(label) {}
    int label_ = 0;
};

enum class McNemarVariant { Chi2Corrected, ExactBinomial };

std::string_view mcnemar_variant_name(McNemarVariant v);

struct McNemarResult {
    std::size_t b = 0; // A right, B wrong
    std::size_t c = 0; // A wrong, B right
    double statistic = 0.0;
    double p_value = 1.0;
    McNemarVariant variant = McNemarVariant::ExactBinomial;
};

/// b + c >= 25: continuity-corrected chi-square with one degree of freedom;
/// otherwise the exact two-sided binomial test. b + c == 0 gives p = 1.
McNemarResult mcnemar_from_counts(std::size_t b, std::size_t c);
McNemarResult mcnemar_test(std::span<const int> preds_a, std::span<const int> preds_b,
                           std::span<const int> y_true);

/// Survival function of the chi-square distribution with one degree of freedom.
double chi2_sf_df1(double x);

} // namespace mbti
