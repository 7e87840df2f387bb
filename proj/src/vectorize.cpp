#include "mbti/vectorize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_set>

#include <fmt/format.h>

#include "mbti/error.hpp"
#include "mbti/linear.hpp"
#include "mbti/metrics.hpp"
#include "mbti/unicode.hpp"

namespace mbti {

double SparseVector::norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
}

double SparseVector::dot(std::span<const double> dense) const {
    double s = 0.0;
    for (std::size_t k = 0; k < indices.size(); ++k) s += values[k] * dense[indices[k]];
    return s;
}

std::vector<double> SparseMatrix::column(std::uint32_t j) const {
    std::vector<double> out(rows.size(), 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        auto it = std::lower_bound(r.indices.begin(), r.indices.end(), j);
        if (it != r.indices.end() && *it == j) out[i] = r.values[static_cast<std::size_t>(it - r.indices.begin())];
    }
    return out;
}

std::string_view analyzer_name(Analyzer a) { return a == Analyzer::Word ? "word" : "char"; }

Analyzer parse_analyzer(std::string_view name) {
    if (name == "word") return Analyzer::Word;
    if (name == "char") return Analyzer::Char;
    throw ConfigError(fmt::format("unknown analyzer '{}'", name));
}

std::vector<std::string> extract_ngrams(const TokenList& tokens, Analyzer analyzer, NgramRange range) {
    std::vector<std::string> out;
    if (analyzer == Analyzer::Word) {
        for (int n = range.lo; n <= range.hi; ++n) {
            const auto un = static_cast<std::size_t>(n);
            for (std::size_t i = 0; i + un <= tokens.size(); ++i) {
                std::string gram = tokens[i];
                for (std::size_t k = 1; k < un; ++k) {
                    gram += ' ';
                    gram += tokens[i + k];
                }
                out.push_back(std::move(gram));
            }
        }
        return out;
    }
    std::string joined;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) joined += ' ';
        joined += tokens[i];
    }
    const auto cps = unicode::decode(joined);
    for (int n = range.lo; n <= range.hi; ++n) {
        const auto un = static_cast<std::size_t>(n);
        for (std::size_t i = 0; i + un <= cps.size(); ++i)
            out.push_back(unicode::encode(std::u32string_view(cps).substr(i, un)));
    }
    return out;
}

long Vocabulary::find(const std::string& term) const {
    auto it = index.find(term);
    return it == index.end() ? -1 : static_cast<long>(it->second);
}

void Vocabulary::rebuild_index() {
    index.clear();
    index.reserve(terms.size());
    for (std::size_t i = 0; i < terms.size(); ++i) index.emplace(terms[i], static_cast<std::uint32_t>(i));
}

TfidfModel fit_tfidf(std::span<const TokenList> docs, Analyzer analyzer, NgramRange range, int min_df) {
    if (docs.empty()) throw ConfigError("cannot fit TF-IDF on zero documents");
    if (range.lo < 1 || range.hi < range.lo)
        throw ConfigError(fmt::format("invalid n-gram range ({}, {})", range.lo, range.hi));

    std::unordered_map<std::string, std::uint32_t> df;
    for (const auto& doc : docs) {
        auto grams = extract_ngrams(doc, analyzer, range);
        std::sort(grams.begin(), grams.end());
        grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
        for (auto& g : grams) ++df[std::move(g)];
    }
    std::vector<std::pair<std::string, std::uint32_t>> kept;
    for (auto& [term, count] : df)
        if (count >= static_cast<std::uint32_t>(std::max(min_df, 1))) kept.emplace_back(term, count);
    if (kept.empty())
        throw DataError(fmt::format("TF-IDF fit error: no n-gram reaches min_df={}", min_df));
    std::sort(kept.begin(), kept.end());

    TfidfModel model;
    model.n_docs = docs.size();
    model.min_df = min_df;
    model.vocab.analyzer = analyzer;
    model.vocab.ngram_range = range;
    const double n = static_cast<double>(docs.size());
    for (auto& [term, count] : kept) {
        model.vocab.terms.push_back(term);
        model.vocab.df.push_back(count);
        model.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
    }
    model.vocab.rebuild_index();
    return model;
}

SparseVector tfidf_from_counts(std::span<const std::pair<std::uint32_t, double>> counts,
                               const TfidfModel& model) {
    SparseVector v;
    v.dim = model.vocab.size();
    std::vector<std::pair<std::uint32_t, double>> sorted(counts.begin(), counts.end());
    std::sort(sorted.begin(), sorted.end());
    double sq = 0.0;
    for (const auto& [j, c] : sorted) {
        if (c == 0.0) continue;
        const double val = c * model.idf[j];
        v.indices.push_back(j);
        v.values.push_back(val);
        sq += val * val;
    }
    if (model.l2_norm && sq > 0.0) {
        const double inv = 1.0 / std::sqrt(sq);
        for (auto& val : v.values) val *= inv;
    }
    return v;
}

SparseVector transform_tfidf(const TokenList& doc, const TfidfModel& model) {
    std::map<std::uint32_t, double> counts;
    for (const auto& g : extract_ngrams(doc, model.vocab.analyzer, model.vocab.ngram_range)) {
        auto it = model.vocab.index.find(g);
        if (it != model.vocab.index.end()) counts[it->second] += 1.0;
    }
    std::vector<std::pair<std::uint32_t, double>> flat(counts.begin(), counts.end());
    return tfidf_from_counts(flat, model);
}

SparseMatrix transform_tfidf(std::span<const TokenList> docs, const TfidfModel& model) {
    SparseMatrix m;
    m.cols = model.vocab.size();
    m.rows.reserve(docs.size());
    for (const auto& d : docs) m.rows.push_back(transform_tfidf(d, model));
    return m;
}

SparseVector FeatureSelector::apply(const SparseVector& row) const {
    SparseVector out;
    out.dim = selected.size();
    std::size_t s = 0;
    for (std::size_t k = 0; k < row.nnz(); ++k) {
        const auto j = row.indices[k];
        while (s < selected.size() && selected[s] < j) ++s;
        if (s == selected.size()) break;
        if (selected[s] == j) {
            out.indices.push_back(static_cast<std::uint32_t>(s));
            out.values.push_back(row.values[k]);
        }
    }
    return out;
}

SparseMatrix FeatureSelector::apply(const SparseMatrix& rows) const {
    SparseMatrix out;
    out.cols = selected.size();
    out.rows.reserve(rows.size());
    for (const auto& r : rows.rows) out.rows.push_back(apply(r));
    return out;
}

std::vector<double> anova_f_scores(const SparseMatrix& X, std::span<const int> y) {
    if (X.size() != y.size()) throw ConfigError("ANOVA: row/label count mismatch");
    const std::size_t V = X.cols;
    std::array<double, 2> n{};
    std::array<std::vector<double>, 2> sum{std::vector<double>(V, 0.0), std::vector<double>(V, 0.0)};
    std::array<std::vector<std::size_t>, 2> nnz{std::vector<std::size_t>(V, 0),
                                                 std::vector<std::size_t>(V, 0)};
    for (std::size_t i = 0; i < X.size(); ++i) {
        const int c = y[i] ? 1 : 0;
        n[c] += 1.0;
        const auto& r = X.rows[i];
        for (std::size_t k = 0; k < r.nnz(); ++k) {
            sum[c][r.indices[k]] += r.values[k];
            ++nnz[c][r.indices[k]];
        }
    }
    std::array<std::vector<double>, 2> mean{std::vector<double>(V), std::vector<double>(V)};
    for (int c = 0; c < 2; ++c)
        for (std::size_t j = 0; j < V; ++j) mean[c][j] = n[c] > 0 ? sum[c][j] / n[c] : 0.0;

    // second pass: within-class sum of squares about the class means
    std::vector<double> ssw(V, 0.0);
    for (std::size_t i = 0; i < X.size(); ++i) {
        const int c = y[i] ? 1 : 0;
        const auto& r = X.rows[i];
        for (std::size_t k = 0; k < r.nnz(); ++k) {
            const double d = r.values[k] - mean[c][r.indices[k]];
            ssw[r.indices[k]] += d * d;
        }
    }
    const double total = n[0] + n[1];
    const double df_within = total - 2.0;
    std::vector<double> f(V, 0.0);
    for (std::size_t j = 0; j < V; ++j) {
        for (int c = 0; c < 2; ++c) {
            const double zeros = n[c] - static_cast<double>(nnz[c][j]);
            ssw[j] += zeros * mean[c][j] * mean[c][j];
        }
        const double grand = (sum[0][j] + sum[1][j]) / total;
        const double ssb = n[0] * (mean[0][j] - grand) * (mean[0][j] - grand) +
                           n[1] * (mean[1][j] - grand) * (mean[1][j] - grand);
        if (ssw[j] == 0.0 || df_within <= 0.0)
            f[j] = ssb == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        else
            f[j] = ssb / (ssw[j] / df_within);
    }
    return f;
}

FeatureSelector anova_f_select(const SparseMatrix& X, std::span<const int> y, std::size_t k) {
    if (k == 0) throw ConfigError("feature count k must be at least 1");
    const auto ones = std::count_if(y.begin(), y.end(), [](int v) { return v != 0; });
    if (ones == 0 || static_cast<std::size_t>(ones) == y.size())
        throw ConfigError("feature selection needs both classes present");

    FeatureSelector sel;
    sel.k = k;
    sel.f_scores = anova_f_scores(X, y);
    std::vector<std::uint32_t> order(X.cols);
    std::iota(order.begin(), order.end(), 0u);
    const auto keep = std::min(k, X.cols);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                          if (sel.f_scores[a] != sel.f_scores[b]) return sel.f_scores[a] > sel.f_scores[b];
                          return a < b;
                      });
    sel.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
    std::sort(sel.selected.begin(), sel.selected.end());
    return sel;
}

VectorizerConfig default_vectorizer(Analyzer analyzer) {
    if (analyzer == Analyzer::Char) return {Analyzer::Char, {2, 5}, 5};
    return {Analyzer::Word, {1, 2}, 2};
}

std::vector<std::size_t> default_k_candidates() {
    std::vector<std::size_t> out;
    for (std::size_t k = 30000; k >= 1000; k -= 1000) out.push_back(k);
    return out;
}

KSearchResult search_k(std::span<const Record* const> dev, Task task,
                       std::span<const std::size_t> candidates, const VectorizerConfig& vec,
                       const TrainConfig& linear, std::uint64_t seed) {
    if (candidates.empty()) throw ConfigError("no k candidates given");
    std::vector<int> y;
    std::vector<std::string> ids;
    for (const auto* r : dev) {
        y.push_back(r->labels.get(task));
        ids.push_back(r->doc.id);
    }
    const auto holdout = stratified_holdout(y, ids, 0.2, seed);
    std::vector<bool> is_holdout(dev.size(), false);
    for (auto p : holdout) is_holdout[p] = true;

    std::vector<TokenList> train_docs, test_docs;
    std::vector<int> train_y, test_y;
    for (std::size_t i = 0; i < dev.size(); ++i) {
        if (is_holdout[i]) {
            test_docs.push_back(dev[i]->doc.tokens);
            test_y.push_back(y[i]);
        } else {
            train_docs.push_back(dev[i]->doc.tokens);
            train_y.push_back(y[i]);
        }
    }
    if (test_docs.empty() || train_docs.empty())
        throw ConfigError("development set too small for the 80/20 k search split");

    const auto tfidf = fit_tfidf(train_docs, vec.analyzer, vec.ngram_range, vec.min_df);
    const auto X_train = transform_tfidf(train_docs, tfidf);
    const auto X_test = transform_tfidf(test_docs, tfidf);

    KSearchResult result;
    double best = -1.0;
    std::size_t last_effective = 0;
    double last_score = -1.0;
    std::size_t failures = 0;
    for (std::size_t k : candidates) {
        const std::size_t effective = std::min(k, X_train.cols);
        double score;
        if (effective == last_effective && last_score >= 0.0) {
            score = last_score;
        } else {
            try {
                const auto sel = anova_f_select(X_train, train_y, k);
                const auto model = fit_logreg(sel.apply(X_train), train_y, linear);
                const auto Xs = sel.apply(X_test);
                std::vector<int> pred;
                for (const auto& row : Xs.rows) pred.push_back(model.predict(row).label);
                score = macro_f1(test_y, pred);
            } catch (const Error&) {
                ++failures;
                continue;
            }
            last_effective = effective;
            last_score = score;
        }
        result.scores.emplace_back(k, score);
        // ties go to the smaller k
        if (score > best || (score == best && k < result.best_k)) {
            best = score;
            result.best_k = k;
        }
    }
    if (failures == candidates.size()) throw NumericError("every k candidate failed to fit");
    return result;
}

} // namespace mbti
