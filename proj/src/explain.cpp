#include "mbti/explain.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>

#include "mbti/error.hpp"
#include "mbti/log.hpp"
#include "mbti/metrics.hpp"
#include "mbti/random.hpp"
#include "mbti/unicode.hpp"

namespace mbti {

namespace {

double macro_f1_from(const ConfusionCounts& c) {
    ConfusionCounts flipped{c.tn, c.tp, c.fn, c.fp};
    return 0.5 * (f1_score(c) + f1_score(flipped));
}

void count(ConfusionCounts& c, int truth, int pred, long delta) {
    auto bump = [&](std::size_t& v) { v = static_cast<std::size_t>(static_cast<long>(v) + delta); };
    if (truth == 1)
        bump(pred == 1 ? c.tp : c.fn);
    else
        bump(pred == 1 ? c.fp : c.tn);
}

struct ColumnIndex {
    // per column: (row, value) in row order
    std::vector<std::vector<std::pair<std::uint32_t, double>>> entries;
};

ColumnIndex index_columns(const SparseMatrix& X, std::size_t cols) {
    ColumnIndex ci;
    ci.entries.resize(cols);
    for (std::size_t r = 0; r < X.rows.size(); ++r) {
        const auto& row = X.rows[r];
        for (std::size_t k = 0; k < row.indices.size(); ++k)
            if (row.indices[k] < cols) ci.entries[row.indices[k]].emplace_back(static_cast<std::uint32_t>(r), row.values[k]);
    }
    return ci;
}

struct Baseline {
    std::vector<double> logits;
    std::vector<int> pred;
    ConfusionCounts counts;
    double score = 0.0;
};

Baseline baseline(const LogisticModel& model, const SparseMatrix& X, std::span<const int> y) {
    if (X.rows.size() != y.size() || y.empty()) throw ConfigError("permutation importance: X and y sizes differ or are empty");
    Baseline b;
    std::span<const double> w(model.w.data(), static_cast<std::size_t>(model.w.size()));
    for (std::size_t i = 0; i < y.size(); ++i) {
        b.logits.push_back(X.rows[i].dot(w) + model.b);
        b.pred.push_back(b.logits.back() > 0.0 ? 1 : 0);
        count(b.counts, y[i], b.pred.back(), 1);
    }
    b.score = macro_f1_from(b.counts);
    return b;
}

double importance_of(const LogisticModel& model, const Baseline& base, std::span<const int> y,
                     const std::vector<std::pair<std::uint32_t, double>>& col, std::size_t feature, int rounds,
                     std::uint64_t seed) {
    if (rounds < 1) throw ConfigError("permutation importance needs rounds >= 1");
    const std::size_t n = y.size();
    const std::size_t nnz = col.size();
    if (nnz == 0) return 0.0;
    if (nnz == n && std::all_of(col.begin(), col.end(), [&](const auto& e) { return e.second == col.front().second; }))
        return 0.0;
    const double wj = model.w[static_cast<Eigen::Index>(feature)];
    if (wj == 0.0) return 0.0;

    double total = 0.0;
    std::unordered_map<std::uint32_t, std::uint32_t> swapped;
    std::map<std::uint32_t, double> new_values;
    for (int round = 0; round < rounds; ++round) {
        Rng rng(derive_seed(seed, feature, static_cast<std::uint64_t>(round)));
        // partial Fisher-Yates: destinations of the nnz non-zero values
        swapped.clear();
        new_values.clear();
        auto at = [&](std::uint32_t i) {
            auto it = swapped.find(i);
            return it == swapped.end() ? i : it->second;
        };
        for (std::size_t k = 0; k < nnz; ++k) {
            const auto i = static_cast<std::uint32_t>(k);
            const auto j = static_cast<std::uint32_t>(k + rng.below(n - k));
            const auto vi = at(i), vj = at(j);
            swapped[i] = vj;
            swapped[j] = vi;
            new_values[vj] = col[k].second;
        }
        ConfusionCounts c = base.counts;
        auto update = [&](std::uint32_t row, double old_v, double new_v) {
            const double z = base.logits[row] + wj * (new_v - old_v);
            const int p = z > 0.0 ? 1 : 0;
            if (p != base.pred[row]) {
                count(c, y[row], base.pred[row], -1);
                count(c, y[row], p, 1);
            }
        };
        for (const auto& [row, v] : col) {
            auto it = new_values.find(row);
            update(row, v, it == new_values.end() ? 0.0 : it->second);
        }
        std::size_t k = 0;
        for (const auto& [row, v] : new_values) {
            while (k < nnz && col[k].first < row) ++k;
            if (k < nnz && col[k].first == row) continue; // handled above
            update(row, 0.0, v);
        }
        total += macro_f1_from(c);
    }
    return base.score - total / static_cast<double>(rounds);
}

} // namespace

namespace {

// Rows sorted by (label, contents) so shuffles do not depend on input order.
std::pair<SparseMatrix, std::vector<int>> canonical_rows(const SparseMatrix& X, std::span<const int> y) {
    if (X.rows.size() != y.size() || y.empty()) throw ConfigError("permutation importance: X and y sizes differ or are empty");
    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (y[a] != y[b]) return y[a] < y[b];
        const auto& ra = X.rows[a];
        const auto& rb = X.rows[b];
        if (ra.indices != rb.indices) return ra.indices < rb.indices;
        return ra.values < rb.values;
    });
    std::pair<SparseMatrix, std::vector<int>> out;
    out.first.cols = X.cols;
    for (std::size_t i : order) {
        out.first.rows.push_back(X.rows[i]);
        out.second.push_back(y[i]);
    }
    return out;
}

} // namespace

double permutation_importance(const LogisticModel& model, const SparseMatrix& X_in, std::span<const int> y_in,
                              std::size_t feature, int rounds, std::uint64_t seed) {
    if (feature >= static_cast<std::size_t>(model.w.size())) throw ConfigError("feature index out of range");
    const auto [X, y] = canonical_rows(X_in, y_in);
    const Baseline base = baseline(model, X, y);
    const auto ci = index_columns(X, static_cast<std::size_t>(model.w.size()));
    return importance_of(model, base, y, ci.entries[feature], feature, rounds, seed);
}

std::vector<double> permutation_importances(const LogisticModel& model, const SparseMatrix& X_in,
                                            std::span<const int> y_in, int rounds, std::uint64_t seed) {
    const auto [X, y] = canonical_rows(X_in, y_in);
    const Baseline base = baseline(model, X, y);
    const auto cols = static_cast<std::size_t>(model.w.size());
    const auto ci = index_columns(X, cols);
    std::vector<double> out(cols);
    for (std::size_t j = 0; j < cols; ++j) out[j] = importance_of(model, base, y, ci.entries[j], j, rounds, seed);
    return out;
}

namespace {

SparseMatrix selected_matrix(const BowClassifier& model, std::span<const Record* const> docs) {
    SparseMatrix X;
    X.cols = model.selector().selected.size();
    for (const auto* r : docs) X.rows.push_back(model.features(r->doc.tokens));
    return X;
}

std::vector<int> task_labels(std::span<const Record* const> docs, Task task) {
    std::vector<int> y;
    for (const auto* r : docs) y.push_back(r->labels.get(task));
    return y;
}

} // namespace

double term_importance(const BowClassifier& model, std::span<const Record* const> docs, Task task,
                       std::size_t vocab_column, int rounds, std::uint64_t seed) {
    const auto& sel = model.selector().selected;
    auto it = std::lower_bound(sel.begin(), sel.end(), static_cast<std::uint32_t>(vocab_column));
    if (it == sel.end() || *it != vocab_column) return 0.0;
    const auto j = static_cast<std::size_t>(it - sel.begin());
    return permutation_importance(model.model(), selected_matrix(model, docs), task_labels(docs, task), j, rounds, seed);
}

TopFeatures top_features(const BowClassifier& model, std::span<const double> weights, std::size_t n) {
    const std::size_t m = model.selector().selected.size();
    if (weights.size() != m) throw ConfigError("weight count does not match the selected feature count");
    std::vector<FeatureWeight> all;
    all.reserve(m);
    for (std::size_t j = 0; j < m; ++j)
        all.push_back({model.term(j), weights[j], model.model().w[static_cast<Eigen::Index>(j)]});
    std::sort(all.begin(), all.end(), [](const FeatureWeight& a, const FeatureWeight& b) {
        if (a.weight != b.weight) return a.weight > b.weight;
        return a.term < b.term;
    });
    TopFeatures out;
    if (n >= m) {
        if (n > m) warn("requested {} features but the model has {}; returning all", n, m);
        out.positive = all;
        out.negative = all;
        return out;
    }
    out.positive.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
    out.negative.assign(all.end() - static_cast<std::ptrdiff_t>(n), all.end());
    return out;
}

TopFeatures top_features(const BowClassifier& model, std::span<const Record* const> docs, Task task, std::size_t n,
                         int rounds, std::uint64_t seed) {
    if (rounds == 0) {
        const auto& w = model.model().w;
        return top_features(model, std::span<const double>(w.data(), static_cast<std::size_t>(w.size())), n);
    }
    const auto weights =
        permutation_importances(model.model(), selected_matrix(model, docs), task_labels(docs, task), rounds, seed);
    return top_features(model, weights, n);
}

namespace {

struct Occurrence {
    std::string term;
    std::size_t begin, end;
};

std::vector<Occurrence> ngram_occurrences(const TokenList& tokens, Analyzer analyzer, NgramRange range) {
    std::vector<Occurrence> out;
    if (analyzer == Analyzer::Word) {
        for (int n = range.lo; n <= range.hi; ++n) {
            const auto un = static_cast<std::size_t>(n);
            for (std::size_t i = 0; i + un <= tokens.size(); ++i) {
                std::string gram = tokens[i];
                for (std::size_t k = 1; k < un; ++k) gram += ' ' + tokens[i + k];
                out.push_back({std::move(gram), i, i + un});
            }
        }
        return out;
    }
    std::u32string cps;
    std::vector<std::size_t> owner; // token index per codepoint; SIZE_MAX for separators
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (t) {
            cps.push_back(U' ');
            owner.push_back(SIZE_MAX);
        }
        for (char32_t c : unicode::decode(tokens[t])) {
            cps.push_back(c);
            owner.push_back(t);
        }
    }
    for (int n = range.lo; n <= range.hi; ++n) {
        const auto un = static_cast<std::size_t>(n);
        for (std::size_t i = 0; i + un <= cps.size(); ++i) {
            std::size_t lo = SIZE_MAX, hi = 0;
            for (std::size_t k = i; k < i + un; ++k) {
                if (owner[k] == SIZE_MAX) continue;
                lo = std::min(lo, owner[k]);
                hi = std::max(hi, owner[k] + 1);
            }
            if (lo == SIZE_MAX) continue; // separator only
            out.push_back({unicode::encode(std::u32string_view(cps).substr(i, un)), lo, hi});
        }
    }
    return out;
}

} // namespace

Highlight highlight_document(const BowClassifier& model, const TokenList& tokens) {
    Highlight h;
    h.tokens = tokens;
    h.bias = model.model().b;
    const SparseVector x = model.features(tokens);
    const auto& w = model.model().w;
    // selected column -> contribution
    std::unordered_map<std::string, double> contribution;
    double sum = 0.0;
    for (std::size_t k = 0; k < x.indices.size(); ++k) {
        const double c = w[static_cast<Eigen::Index>(x.indices[k])] * x.values[k];
        contribution.emplace(model.term(x.indices[k]), c);
        sum += c;
    }
    h.logit = sum + h.bias;
    h.predicted = h.logit > 0.0 ? 1 : 0;
    if (contribution.empty()) return h;

    const auto& vocab = model.tfidf().vocab;
    auto occ = ngram_occurrences(tokens, vocab.analyzer, vocab.ngram_range);
    std::unordered_map<std::string, std::size_t> times;
    for (const auto& o : occ)
        if (contribution.count(o.term)) ++times[o.term];
    for (const auto& o : occ) {
        auto it = contribution.find(o.term);
        if (it == contribution.end()) continue;
        h.spans.push_back({o.begin, o.end, o.term, it->second / static_cast<double>(times[o.term])});
    }
    std::stable_sort(h.spans.begin(), h.spans.end(), [](const HighlightSpan& a, const HighlightSpan& b) {
        return a.begin != b.begin ? a.begin < b.begin : a.end < b.end;
    });
    return h;
}

std::string render_highlight(const Highlight& h, Task task) {
    std::vector<double> per_token(h.tokens.size(), 0.0);
    for (const auto& s : h.spans)
        for (std::size_t t = s.begin; t < s.end; ++t) per_token[t] += s.contribution / static_cast<double>(s.end - s.begin);
    const auto letters = task_letters(task);
    std::string out = fmt::format("predicted={} logit={:+.6f} bias={:+.6f}\n", h.predicted ? letters.second : letters.first,
                                  h.logit, h.bias);
    for (std::size_t t = 0; t < h.tokens.size(); ++t) {
        if (t) out.push_back(' ');
        if (per_token[t] != 0.0)
            out += fmt::format("[{}:{:+.2f}]", h.tokens[t], per_token[t]);
        else
            out += h.tokens[t];
    }
    out.push_back('\n');
    return out;
}

std::string render_weights_tsv(std::span<const Task> tasks, std::span<const TopFeatures> features) {
    if (tasks.size() != features.size()) throw ConfigError("task and feature list counts differ");
    std::string out;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (i) out.push_back('\t');
        out += fmt::format("Weight\t{}", task_name(tasks[i]));
    }
    out.push_back('\n');
    auto block = [&](bool positive) {
        std::size_t rows = 0;
        for (const auto& f : features) rows = std::max(rows, (positive ? f.positive : f.negative).size());
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t i = 0; i < features.size(); ++i) {
                if (i) out.push_back('\t');
                const auto& list = positive ? features[i].positive : features[i].negative;
                if (r < list.size())
                    out += fmt::format("{:+.6f}\t{}", list[r].weight, list[r].term);
                else
                    out += "\t";
            }
            out.push_back('\n');
        }
    };
    block(true);
    for (std::size_t i = 0; i < features.size(); ++i) out += i ? "\t...\t..." : "...\t...";
    out.push_back('\n');
    block(false);
    return out;
}

} // namespace mbti
