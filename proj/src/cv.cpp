#include "mbti/cv.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include <fmt/format.h>

#include "mbti/error.hpp"

namespace mbti {

using nlohmann::json;

MetricSummary MetricSummary::of(const MetricsReport& m) {
    return {m.accuracy, m.per_class[1].precision, m.per_class[1].recall, m.macro_f1, m.weighted_f1};
}

namespace {

constexpr std::array<double MetricSummary::*, 5> kFields{&MetricSummary::accuracy, &MetricSummary::precision,
                                                         &MetricSummary::recall, &MetricSummary::macro_f1,
                                                         &MetricSummary::weighted_f1};

[[noreturn]] void rethrow_for_fold(std::exception_ptr ep, int fold) {
    try {
        std::rethrow_exception(ep);
    } catch (const NumericError& e) {
        throw NumericError(fmt::format("fold {}: {}", fold, e.what()));
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("fold {}: {}", fold, e.what()));
    } catch (const DataError& e) {
        throw DataError(fmt::format("fold {}: {}", fold, e.what()));
    } catch (const std::exception& e) {
        throw Error(fmt::format("fold {}: {}", fold, e.what()));
    }
}

struct FoldOutput {
    MetricsReport metrics;
    std::vector<OofPrediction> predictions;
};

} // namespace

void summarize(CvResult& r) {
    r.mean = {};
    r.stdev = {};
    const double n = static_cast<double>(r.folds.size());
    if (r.folds.empty()) return;
    for (auto f : kFields) {
        double sum = 0.0;
        for (const auto& m : r.folds) sum += MetricSummary::of(m).*f;
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& m : r.folds) {
            const double d = MetricSummary::of(m).*f - mean;
            ss += d * d;
        }
        r.mean.*f = mean;
        r.stdev.*f = r.folds.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    }
}

CvResult run_cv(const ModelSpec& spec, const TaskContext& context, const Dataset& ds, const FoldPlan& folds,
                std::uint64_t seed, int workers) {
    if (folds.k < 2) throw ConfigError("cross-validation needs k >= 2");
    std::vector<std::vector<const Record*>> members(static_cast<std::size_t>(folds.k));
    for (const auto& [id, f] : folds.assignment) {
        if (f < 0 || f >= folds.k) throw ConfigError(fmt::format("fold index {} out of range for '{}'", f, id));
        members[static_cast<std::size_t>(f)].push_back(&ds[ds.index_of(id)]);
    }
    for (int f = 0; f < folds.k; ++f)
        if (members[static_cast<std::size_t>(f)].empty()) throw ConfigError(fmt::format("fold {} is empty", f));

    const Task task = folds.task;
    std::vector<FoldOutput> outputs(static_cast<std::size_t>(folds.k));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(folds.k));

    auto run_fold = [&](int f) {
        std::vector<const Record*> train;
        for (int g = 0; g < folds.k; ++g)
            if (g != f) train.insert(train.end(), members[static_cast<std::size_t>(g)].begin(), members[static_cast<std::size_t>(g)].end());
        const auto& test = members[static_cast<std::size_t>(f)];
        auto clf = make_classifier(spec, context);
        clf->fit(train, task, seed + static_cast<std::uint64_t>(f));
        const auto preds = clf->predict(test);
        std::vector<int> truth, pred;
        auto& out = outputs[static_cast<std::size_t>(f)];
        for (std::size_t i = 0; i < test.size(); ++i) {
            truth.push_back(test[i]->labels.get(task));
            pred.push_back(preds[i].label);
            out.predictions.push_back({test[i]->doc.id, f, truth.back(), preds[i].label, preds[i].p1});
        }
        out.metrics = compute_metrics(truth, pred);
    };

    const int n_workers = std::clamp(workers, 1, folds.k);
    if (n_workers == 1) {
        for (int f = 0; f < folds.k; ++f) {
            try {
                run_fold(f);
            } catch (...) {
                rethrow_for_fold(std::current_exception(), f);
            }
        }
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; ++w) {
            pool.emplace_back([&] {
                for (int f = next++; f < folds.k; f = next++) {
                    try {
                        run_fold(f);
                    } catch (...) {
                        errors[static_cast<std::size_t>(f)] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        for (int f = 0; f < folds.k; ++f)
            if (errors[static_cast<std::size_t>(f)]) rethrow_for_fold(errors[static_cast<std::size_t>(f)], f);
    }

    CvResult r;
    r.model = spec.kind;
    r.task = task;
    r.seed = seed;
    r.k = context.k;
    for (auto& o : outputs) {
        r.folds.push_back(o.metrics);
        std::sort(o.predictions.begin(), o.predictions.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
        r.predictions.insert(r.predictions.end(), o.predictions.begin(), o.predictions.end());
    }
    summarize(r);
    return r;
}

ReportFormat parse_report_format(std::string_view name) {
    if (name == "tsv") return ReportFormat::Tsv;
    if (name == "md" || name == "markdown") return ReportFormat::Markdown;
    throw ConfigError(fmt::format("unknown report format '{}' (expected tsv or md)", name));
}

std::string render_report(std::vector<CvResult> results, ReportFormat format) {
    std::stable_sort(results.begin(), results.end(), [](const CvResult& a, const CvResult& b) {
        if (a.task != b.task) return static_cast<int>(a.task) < static_cast<int>(b.task);
        return model_kind_name(a.model) < model_kind_name(b.model);
    });
    std::string out;
    if (format == ReportFormat::Tsv) {
        out = "task\tmodel\tAcc\tP\tR\tF1\twF1\n";
        for (const auto& r : results)
            out += fmt::format("{}\t{}\t{:.2f}\t{:.2f}\t{:.2f}\t{:.2f}\t{:.2f}\n", task_name(r.task), model_kind_name(r.model),
                               r.mean.accuracy, r.mean.precision, r.mean.recall, r.mean.macro_f1, r.mean.weighted_f1);
    } else {
        out = "| Task | Model | Acc | P | R | F1 | wF1 |\n|---|---|---|---|---|---|---|\n";
        for (const auto& r : results)
            out += fmt::format("| {} | {} | {:.2f} | {:.2f} | {:.2f} | {:.2f} | {:.2f} |\n", task_name(r.task),
                               model_kind_name(r.model), r.mean.accuracy, r.mean.precision, r.mean.recall,
                               r.mean.macro_f1, r.mean.weighted_f1);
    }
    return out;
}

std::string render_folds(const CvResult& r) {
    std::string out = "fold\tAcc\tP\tR\tF1\twF1\ttp\ttn\tfp\tfn\n";
    for (std::size_t f = 0; f < r.folds.size(); ++f) {
        const auto& m = r.folds[f];
        const auto s = MetricSummary::of(m);
        out += fmt::format("{}\t{:.6f}\t{:.6f}\t{:.6f}\t{:.6f}\t{:.6f}\t{}\t{}\t{}\t{}\n", f, s.accuracy, s.precision,
                           s.recall, s.macro_f1, s.weighted_f1, m.counts.tp, m.counts.tn, m.counts.fp, m.counts.fn);
    }
    return out;
}

namespace {

json summary_json(const MetricSummary& s) {
    return {{"accuracy", s.accuracy}, {"precision", s.precision}, {"recall", s.recall},
            {"macro_f1", s.macro_f1}, {"weighted_f1", s.weighted_f1}};
}

} // namespace

json cv_result_to_json(const CvResult& r) {
    json folds = json::array();
    for (const auto& m : r.folds)
        folds.push_back({{"tp", m.counts.tp}, {"tn", m.counts.tn}, {"fp", m.counts.fp}, {"fn", m.counts.fn}});
    return {{"model", model_kind_name(r.model)}, {"task", task_name(r.task)}, {"seed", r.seed},
            {"k", r.k},                          {"folds", folds},            {"mean", summary_json(r.mean)},
            {"stdev", summary_json(r.stdev)}};
}

CvResult cv_result_from_json(const json& j) {
    try {
        CvResult r;
        r.model = parse_model_kind(j.at("model").get<std::string>());
        r.task = parse_task(j.at("task").get<std::string>());
        r.seed = j.at("seed").get<std::uint64_t>();
        r.k = j.value("k", std::size_t{0});
        for (const auto& f : j.at("folds")) {
            const auto tp = f.at("tp").get<std::size_t>(), tn = f.at("tn").get<std::size_t>();
            const auto fp = f.at("fp").get<std::size_t>(), fn = f.at("fn").get<std::size_t>();
            std::vector<int> truth, pred;
            auto add = [&](std::size_t n, int t, int p) {
                truth.insert(truth.end(), n, t);
                pred.insert(pred.end(), n, p);
            };
            add(tp, 1, 1);
            add(tn, 0, 0);
            add(fp, 0, 1);
            add(fn, 1, 0);
            r.folds.push_back(compute_metrics(truth, pred));
        }
        summarize(r);
        return r;
    } catch (const json::exception& e) {
        throw SchemaError(fmt::format("malformed cross-validation result: {}", e.what()));
    }
}

} // namespace mbti
