#include "mbti/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "mbti/error.hpp"

namespace mbti {

ConfusionCounts confusion(std::span<const int> y_true, std::span<const int> y_pred) {
    if (y_true.size() != y_pred.size())
        throw ConfigError(fmt::format("label length mismatch: {} truths vs {} predictions",
                                      y_true.size(), y_pred.size()));
    ConfusionCounts c;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const bool t = y_true[i] != 0;
        const bool p = y_pred[i] != 0;
        if (t && p)
            ++c.tp;
        else if (!t && !p)
            ++c.tn;
        else if (p)
            ++c.fp;
        else
            ++c.fn;
    }
    return c;
}

namespace {
double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
} // namespace

double precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp); }
double recall(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }
double f1_score(const ConfusionCounts& c) { return ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn); }
double accuracy(const ConfusionCounts& c) { return ratio(c.tp + c.tn, c.total()); }

MetricsReport compute_metrics(std::span<const int> y_true, std::span<const int> y_pred) {
    if (y_true.empty()) throw ConfigError("cannot score an empty prediction set");
    MetricsReport r;
    r.counts = confusion(y_true, y_pred);
    const auto& pos = r.counts;
    // class 0 as positive swaps the roles of tp/tn and fp/fn
    const ConfusionCounts neg{pos.tn, pos.tp, pos.fn, pos.fp};
    for (int cls = 0; cls < 2; ++cls) {
        const auto& c = cls == 1 ? pos : neg;
        auto& s = r.per_class[static_cast<std::size_t>(cls)];
        s.precision = precision(c);
        s.recall = recall(c);
        s.f1 = f1_score(c);
        s.support = c.tp + c.fn;
    }
    const auto n = static_cast<double>(pos.total());
    r.accuracy = accuracy(pos);
    r.macro_f1 = 0.5 * (r.per_class[0].f1 + r.per_class[1].f1);
    r.weighted_f1 = (static_cast<double>(r.per_class[0].support) * r.per_class[0].f1 +
                     static_cast<double>(r.per_class[1].support) * r.per_class[1].f1) /
                    n;
    return r;
}

double macro_f1(std::span<const int> y_true, std::span<const int> y_pred) {
    return compute_metrics(y_true, y_pred).macro_f1;
}

MajorityBaseline MajorityBaseline::fit(std::span<const int> train_labels) {
    if (train_labels.empty()) throw ConfigError("majority baseline needs training labels");
    const auto ones = static_cast<std::size_t>(std::count_if(
        train_labels.begin(), train_labels.end(), [](int v) { return v != 0; }));
    return MajorityBaseline(ones > train_labels.size() - ones ? 1 : 0);
}

std::string_view mcnemar_variant_name(McNemarVariant v) {
    return v == McNemarVariant::Chi2Corrected ? "chi2-corrected" : "exact-binomial";
}

double chi2_sf_df1(double x) {
    if (!(x > 0.0)) return 1.0;
    return std::erfc(std::sqrt(0.5 * x));
}

McNemarResult mcnemar_from_counts(std::size_t b, std::size_t c) {
    McNemarResult r;
    r.b = b;
    r.c = c;
    const std::size_t n = b + c;
    if (n == 0) {
        r.statistic = 0.0;
        r.p_value = 1.0;
        r.variant = McNemarVariant::ExactBinomial;
        return r;
    }
    if (n >= 25) {
        const double diff = std::abs(static_cast<double>(b) - static_cast<double>(c)) - 1.0;
        r.statistic = diff * diff / static_cast<double>(n);
        r.p_value = chi2_sf_df1(r.statistic);
        r.variant = McNemarVariant::Chi2Corrected;
    } else {
        const std::size_t hi = std::max(b, c);
        // P(X >= hi), X ~ Binomial(n, 1/2), summed exactly in doubles
        double tail = 0.0;
        double coeff = 1.0; // C(n, 0)
        for (std::size_t i = 0; i <= n; ++i) {
            if (i >= hi) tail += coeff;
            coeff = coeff * static_cast<double>(n - i) / static_cast<double>(i + 1);
        }
        r.statistic = static_cast<double>(hi);
        r.p_value = std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(n)));
        r.variant = McNemarVariant::ExactBinomial;
    }
    return r;
}

McNemarResult mcnemar_test(std::span<const int> preds_a, std::span<const int> preds_b,
                           std::span<const int> y_true) {
    if (preds_a.size() != y_true.size() || preds_b.size() != y_true.size())
        throw ConfigError("McNemar test needs prediction vectors of equal length");
    std::size_t b = 0, c = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const bool a_ok = (preds_a[i] != 0) == (y_true[i] != 0);
        const bool b_ok = (preds_b[i] != 0) == (y_true[i] != 0);
        if (a_ok && !b_ok) ++b;
        if (!a_ok && b_ok) ++c;
    }
    return mcnemar_from_counts(b, c);
}

} // namespace mbti
