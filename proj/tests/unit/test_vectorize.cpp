#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include <doctest.h>
#include <fmt/format.h>

#include "mbti/error.hpp"
#include "mbti/linear.hpp"
#include "mbti/random.hpp"
#include "mbti/vectorize.hpp"
#include "planted.hpp"

using namespace mbti;

namespace {

const std::vector<TokenList> kTwoDocs{{"a", "b", "a"}, {"b", "c"}};

double value_of(const SparseVector& v, long col) {
    for (std::size_t i = 0; i < v.nnz(); ++i)
        if (static_cast<long>(v.indices[i]) == col) return v.values[i];
    return 0.0;
}

SparseMatrix dense_to_sparse(const std::vector<std::vector<double>>& rows) {
    SparseMatrix m;
    m.cols = rows.empty() ? 0 : rows[0].size();
    for (const auto& r : rows) {
        SparseVector v;
        v.dim = m.cols;
        for (std::size_t j = 0; j < r.size(); ++j)
            if (r[j] != 0.0) {
                v.indices.push_back(static_cast<std::uint32_t>(j));
                v.values.push_back(r[j]);
            }
        m.rows.push_back(v);
    }
    return m;
}

/// Textbook two-group one-way ANOVA on one column.
double anova_oracle(const std::vector<double>& x, const std::vector<int>& y) {
    double sum[2] = {0, 0};
    double n[2] = {0, 0};
    for (std::size_t i = 0; i < x.size(); ++i) {
        sum[y[i]] += x[i];
        n[y[i]] += 1;
    }
    const double grand = (sum[0] + sum[1]) / (n[0] + n[1]);
    const double mean[2] = {sum[0] / n[0], sum[1] / n[1]};
    double between = 0, within = 0;
    for (int c = 0; c < 2; ++c) between += n[c] * (mean[c] - grand) * (mean[c] - grand);
    for (std::size_t i = 0; i < x.size(); ++i) within += (x[i] - mean[y[i]]) * (x[i] - mean[y[i]]);
    const double msb = between / 1.0;
    const double msw = within / (n[0] + n[1] - 2.0);
    if (msb == 0.0 && msw == 0.0) return 0.0;
    return msb / msw;
}

} // namespace

TEST_CASE("fit_tfidf smoothed idf") {
    const auto m = fit_tfidf(kTwoDocs, Analyzer::Word, {1, 1}, 1);
    REQUIRE(m.vocab.size() == 3);
    CHECK(m.idf[static_cast<std::size_t>(m.vocab.find("b"))] == doctest::Approx(1.0).epsilon(1e-15));
    const double rare = std::log(1.5) + 1.0;
    CHECK(m.idf[static_cast<std::size_t>(m.vocab.find("a"))] == doctest::Approx(rare).epsilon(1e-14));
    CHECK(m.idf[static_cast<std::size_t>(m.vocab.find("c"))] == doctest::Approx(1.4055).epsilon(1e-4));
    for (double v : m.idf) CHECK(v > 0.0);
}

TEST_CASE("vocabulary invariants") {
    const auto m = fit_tfidf(kTwoDocs, Analyzer::Word, {1, 2}, 1);
    CHECK(m.vocab.terms == std::vector<std::string>{"a", "a b", "b", "b a", "b c", "c"});
    for (std::size_t i = 0; i < m.vocab.size(); ++i) {
        CHECK(m.vocab.find(m.vocab.terms[i]) == static_cast<long>(i));
        CHECK(m.vocab.df[i] >= 1);
    }
    CHECK(m.vocab.find("zzz") == -1);
}

TEST_CASE("min_df filtering") {
    const auto m = fit_tfidf(kTwoDocs, Analyzer::Word, {1, 1}, 2);
    CHECK(m.vocab.terms == std::vector<std::string>{"b"});
    CHECK_THROWS_AS(fit_tfidf(kTwoDocs, Analyzer::Word, {1, 1}, 3), DataError);
    CHECK_THROWS_AS(fit_tfidf(kTwoDocs, Analyzer::Word, {2, 1}, 1), ConfigError);
}

TEST_CASE("char n-grams") {
    const auto grams = extract_ngrams({"abc"}, Analyzer::Char, {2, 2});
    CHECK(std::set<std::string>(grams.begin(), grams.end()) == std::set<std::string>{"ab", "bc"});
    const auto multi = extract_ngrams({"\xC3\xA9t\xC3\xA9"}, Analyzer::Char, {2, 2});
    CHECK(multi == std::vector<std::string>{"\xC3\xA9t", "t\xC3\xA9"});
}

TEST_CASE("transform_tfidf") {
    const auto m = fit_tfidf(kTwoDocs, Analyzer::Word, {1, 1}, 1);
    SUBCASE("hand-computed weights") {
        const auto v = transform_tfidf(kTwoDocs[0], m);
        const double a = 2.0 * (std::log(1.5) + 1.0);
        const double norm = std::sqrt(a * a + 1.0);
        CHECK(value_of(v, m.vocab.find("a")) == doctest::Approx(a / norm).epsilon(1e-14));
        CHECK(value_of(v, m.vocab.find("b")) == doctest::Approx(1.0 / norm).epsilon(1e-14));
        CHECK(value_of(v, m.vocab.find("a")) == doctest::Approx(0.942).epsilon(1e-3));
        CHECK(value_of(v, m.vocab.find("b")) == doctest::Approx(0.335).epsilon(2e-3));
    }
    SUBCASE("out-of-vocabulary document is the zero vector") {
        const auto v = transform_tfidf({"q", "r"}, m);
        CHECK(v.nnz() == 0);
        CHECK(v.dim == 3);
    }
    SUBCASE("norm is 0 or 1 on random documents") {
        Rng rng(1);
        std::vector<TokenList> docs;
        for (int d = 0; d < 60; ++d) {
            TokenList t;
            const auto len = rng.below(12);
            for (std::uint64_t i = 0; i < len; ++i) t.push_back(fmt::format("t{}", rng.below(30)));
            docs.push_back(t);
        }
        const auto fitted = fit_tfidf(docs, Analyzer::Word, {1, 2}, 2);
        for (int d = 0; d < 200; ++d) {
            TokenList t;
            const auto len = rng.below(12);
            for (std::uint64_t i = 0; i < len; ++i) t.push_back(fmt::format("t{}", rng.below(40)));
            const auto v = transform_tfidf(t, fitted);
            if (v.nnz() == 0) continue;
            CHECK(std::abs(v.norm() - 1.0) <= 1e-9);
            CHECK(std::is_sorted(v.indices.begin(), v.indices.end()));
            for (double x : v.values) CHECK(x != 0.0);
        }
    }
    SUBCASE("scaling raw counts leaves the vector unchanged") {
        const std::vector<std::pair<std::uint32_t, double>> counts{{0, 2.0}, {2, 1.0}, {1, 3.0}};
        const auto base = tfidf_from_counts(counts, m);
        for (double s : {0.5, 3.0, 1e4}) {
            auto scaled = counts;
            for (auto& c : scaled) c.second *= s;
            const auto v = tfidf_from_counts(scaled, m);
            REQUIRE(v.nnz() == base.nnz());
            for (std::size_t i = 0; i < v.nnz(); ++i) CHECK(v.values[i] == doctest::Approx(base.values[i]).epsilon(1e-14));
        }
    }
}

TEST_CASE("anova F scores") {
    SUBCASE("six-sample fixture") {
        const auto X = dense_to_sparse({{1}, {2}, {3}, {4}, {5}, {6}});
        const std::vector<int> y{0, 0, 0, 1, 1, 1};
        CHECK(anova_f_scores(X, y)[0] == doctest::Approx(13.5).epsilon(1e-14));
    }
    SUBCASE("constant column scores 0 and a perfect separator scores highest") {
        const auto X = dense_to_sparse({{2, 0, 0.3}, {2, 0, 0.1}, {2, 1, 0.9}, {2, 1, 0.2}});
        const std::vector<int> y{0, 0, 1, 1};
        const auto f = anova_f_scores(X, y);
        CHECK(f[0] == 0.0);
        CHECK(f[1] > f[2]);
        const auto sel = anova_f_select(X, y, 1);
        CHECK(sel.selected == std::vector<std::uint32_t>{1});
    }
    SUBCASE("matches a brute-force oracle on random 20x30 matrices") {
        Rng rng(8);
        for (int trial = 0; trial < 25; ++trial) {
            std::vector<std::vector<double>> rows(20, std::vector<double>(30));
            for (auto& r : rows)
                for (auto& v : r) v = rng.below(3) == 0 ? 0.0 : rng.uniform(0.0, 2.0);
            std::vector<int> y(20);
            for (std::size_t i = 0; i < 20; ++i) y[i] = static_cast<int>(i % 2);
            rng.shuffle(y.begin(), y.end());
            const auto X = dense_to_sparse(rows);
            const auto f = anova_f_scores(X, y);
            for (std::uint32_t j = 0; j < 30; ++j) {
                const double want = anova_oracle(X.column(j), y);
                if (std::isinf(want)) {
                    CHECK(std::isinf(f[j]));
                } else {
                    CHECK(std::abs(f[j] - want) <= 1e-10 * std::max(1.0, std::abs(want)));
                }
                CHECK(f[j] >= 0.0);
            }
        }
    }
}

TEST_CASE("anova_f_select") {
    Rng rng(2);
    std::vector<std::vector<double>> rows(30, std::vector<double>(12));
    for (auto& r : rows)
        for (auto& v : r) v = rng.uniform();
    std::vector<int> y(30);
    for (std::size_t i = 0; i < 30; ++i) y[i] = static_cast<int>(i % 3 == 0);
    const auto X = dense_to_sparse(rows);

    SUBCASE("selects the k largest scores") {
        const auto sel = anova_f_select(X, y, 5);
        REQUIRE(sel.selected.size() == 5);
        CHECK(std::is_sorted(sel.selected.begin(), sel.selected.end()));
        std::vector<std::uint32_t> order(12);
        std::iota(order.begin(), order.end(), 0u);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return sel.f_scores[a] > sel.f_scores[b]; });
        std::vector<std::uint32_t> top(order.begin(), order.begin() + 5);
        std::sort(top.begin(), top.end());
        CHECK(sel.selected == top);
    }
    SUBCASE("k above V keeps every column") { CHECK(anova_f_select(X, y, 100).selected.size() == 12); }
    SUBCASE("ties go to the lower index") {
        const auto T = dense_to_sparse({{1, 1, 0}, {1, 1, 0}, {0, 0, 1}, {0, 0, 1}});
        CHECK(anova_f_select(T, std::vector<int>{0, 0, 1, 1}, 1).selected == std::vector<std::uint32_t>{0});
    }
    SUBCASE("document order does not change the selection") {
        std::vector<std::size_t> perm(30);
        std::iota(perm.begin(), perm.end(), 0u);
        Rng r2(4);
        r2.shuffle(perm.begin(), perm.end());
        SparseMatrix P;
        P.cols = X.cols;
        std::vector<int> py;
        for (auto i : perm) {
            P.rows.push_back(X.rows[i]);
            py.push_back(y[i]);
        }
        CHECK(anova_f_select(P, py, 4).selected == anova_f_select(X, y, 4).selected);
    }
    SUBCASE("single class and k = 0 are rejected") {
        CHECK_THROWS_AS(anova_f_select(X, std::vector<int>(30, 1), 3), ConfigError);
        CHECK_THROWS_AS(anova_f_select(X, y, 0), ConfigError);
    }
    SUBCASE("apply projects onto the selected columns") {
        const auto sel = anova_f_select(X, y, 3);
        const auto row = sel.apply(X.rows[0]);
        CHECK(row.dim == 3);
        for (std::size_t i = 0; i < row.nnz(); ++i) CHECK(row.values[i] == X.rows[0].values[sel.selected[row.indices[i]]]);
    }
}

TEST_CASE("default k candidates") {
    const auto k = default_k_candidates();
    REQUIRE(k.size() == 30);
    CHECK(k.front() == 30000);
    CHECK(k.back() == 1000);
    for (std::size_t i = 1; i < k.size(); ++i) CHECK(k[i - 1] - k[i] == 1000);
}

TEST_CASE("search_k") {
    testing::PlantedOptions o;
    o.docs = 200;
    o.filler_tokens = 30;
    const auto ds = testing::planted_corpus(o);
    std::vector<const Record*> dev;
    for (const auto& r : ds.records()) dev.push_back(&r);
    const auto vec = default_vectorizer(Analyzer::Word);

    SUBCASE("a small vocabulary saturates every candidate and the smallest k wins") {
        const auto r = search_k(dev, Task::EI, default_k_candidates(), vec, TrainConfig{}, 13);
        CHECK(r.best_k == 1000);
        CHECK(r.scores.size() == 30);
    }
    SUBCASE("deterministic for a fixed seed") {
        const std::vector<std::size_t> cands{50, 20, 5, 2};
        const auto a = search_k(dev, Task::EI, cands, vec, TrainConfig{}, 5);
        const auto b = search_k(dev, Task::EI, cands, vec, TrainConfig{}, 5);
        CHECK(a.best_k == b.best_k);
        CHECK(a.scores == b.scores);
    }
}

TEST_CASE("search_k with planted signal tokens") {
    // 50 signal tokens split between the classes, drowned in 3000 fillers.
    Rng rng(17);
    std::vector<Record> recs;
    for (int i = 0; i < 400; ++i) {
        const int y = i % 2;
        std::string text;
        for (int s = 0; s < 3; ++s) text += fmt::format("sig{} ", 2 * rng.below(25) + static_cast<std::uint64_t>(y));
        for (int f = 0; f < 60; ++f) text += fmt::format("f{} ", rng.below(3000));
        Record r;
        r.doc.id = fmt::format("d{:04d}", i);
        r.doc.lang = "en";
        r.doc.tokens = preprocess_text(text, {});
        r.labels.ei = static_cast<std::uint8_t>(y);
        recs.push_back(r);
    }
    const Dataset ds(recs);
    std::vector<const Record*> dev;
    for (const auto& r : ds.records()) dev.push_back(&r);
    VectorizerConfig vec = default_vectorizer(Analyzer::Word);
    vec.ngram_range = {1, 1};
    const std::vector<std::size_t> cands{30000, 1000};
    const auto r = search_k(dev, Task::EI, cands, vec, TrainConfig{}, 13);
    const double at_large = r.scores[0].second;
    const double at_small = r.scores[1].second;
    CHECK(at_small >= at_large - 0.02);
}
