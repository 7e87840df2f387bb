#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbti/corpus.hpp"
#include "mbti/metrics.hpp"
#include "mbti/models.hpp"

namespace mbti {

/// Headline numbers of one evaluation. P and R score label 1 (I, S, F, J)
/// as the positive class; F1 is macro-F1.
struct MetricSummary {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double macro_f1 = 0.0;
    double weighted_f1 = 0.0;

    static MetricSummary of(const MetricsReport& m);
};

struct OofPrediction {
    std::string id;
    int fold = 0;
    int truth = 0;
    int label = 0;
    double p1 = 0.5;
};

struct CvResult {
    ModelKind model = ModelKind::Majority;
    Task task = Task::EI;
    std::uint64_t seed = 13;
    std::vector<MetricsReport> folds;
    MetricSummary mean;
    MetricSummary stdev; // sample standard deviation over folds
    /// Out-of-fold predictions ordered by fold, then id.
    std::vector<OofPrediction> predictions;
    /// Hyperparameter chosen on the development split (bag-of-words k).
    std::size_t k = 0;
};

/// Means and sample standard deviations, summed in fold order.
void summarize(CvResult& result);

/// For fold i, trains on the other folds with seed + i and evaluates on fold
/// i. Folds run on `workers` threads; results are aggregated in fold order,
/// so the output does not depend on the worker count. A failing fold aborts
/// the run with an error naming the fold.
CvResult run_cv(const ModelSpec& spec, const TaskContext& context, const Dataset& ds, const FoldPlan& folds,
                std::uint64_t seed, int workers = 1);

enum class ReportFormat { Tsv, Markdown };
ReportFormat parse_report_format(std::string_view name);

/// Rows sorted by task, then model name; columns Acc, P, R, F1 (macro) and
/// wF1, rounded to two decimals.
std::string render_report(std::vector<CvResult> results, ReportFormat format);
/// One row per fold with unrounded values.
std::string render_folds(const CvResult& result);

nlohmann::json cv_result_to_json(const CvResult& result);
CvResult cv_result_from_json(const nlohmann::json& j);

} // namespace mbti
