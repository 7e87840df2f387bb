#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <doctest.h>

#include "mbti/error.hpp"
#include "mbti/explain.hpp"
#include "mbti/log.hpp"
#include "mbti/metrics.hpp"
#include "mbti/random.hpp"
#include "planted.hpp"

using namespace mbti;

namespace {

SparseVector dense_row(const std::vector<double>& v) {
    SparseVector s;
    s.dim = v.size();
    for (std::size_t j = 0; j < v.size(); ++j)
        if (v[j] != 0.0) {
            s.indices.push_back(static_cast<std::uint32_t>(j));
            s.values.push_back(v[j]);
        }
    return s;
}

SparseMatrix dense_matrix(const std::vector<std::vector<double>>& rows) {
    SparseMatrix X;
    X.cols = rows.front().size();
    for (const auto& r : rows) X.rows.push_back(dense_row(r));
    return X;
}

double macro_f1_of(const LogisticModel& m, const SparseMatrix& X, const std::vector<int>& y) {
    std::vector<int> p;
    for (const auto& r : X.rows) p.push_back(m.predict(r).label);
    return compute_metrics(y, p).macro_f1;
}

testing::PlantedOptions small_planted() {
    testing::PlantedOptions o;
    o.phrase_len = 1;
    o.filler_tokens = 30;
    o.filler_vocab = 300;
    return o;
}

struct Fitted {
    Dataset ds;
    std::vector<const Record*> recs;
    BowClassifier clf{ModelKind::BowWord, default_vectorizer(Analyzer::Word), TrainConfig{}, 2000};
};

/// A bag-of-words model fitted on the planted corpus; "alpha" marks label 0
/// and "omega" label 1.
const Fitted& fitted() {
    static Fitted* f = [] {
        set_quiet(true);
        auto* out = new Fitted{testing::planted_corpus(small_planted()), {}};
        for (const auto& r : out->ds.records()) out->recs.push_back(&r);
        out->clf.fit(out->recs, Task::EI, 13);
        return out;
    }();
    return *f;
}

std::size_t selected_index(const BowClassifier& clf, const std::string& term) {
    for (std::size_t j = 0; j < clf.selector().selected.size(); ++j)
        if (clf.term(j) == term) return j;
    return SIZE_MAX;
}

} // namespace

TEST_CASE("permutation importance basics") {
    LogisticModel m;
    m.w = Eigen::VectorXd::Zero(3);
    m.w << 2.0, 0.0, 1.0;
    m.b = -1.0;
    const auto X = dense_matrix({{1, 3, 0}, {0, 1, 0}, {1, 2, 1}, {0, 0, 1}, {1, 5, 1}, {0, 4, 0}});
    const std::vector<int> y{1, 0, 1, 0, 1, 0};

    SUBCASE("zero weight leaves predictions unchanged") {
        CHECK(std::abs(permutation_importance(m, X, y, 1, 5, 13)) <= 1e-12);
    }
    SUBCASE("constant column") {
        const auto C = dense_matrix({{1, 1, 0}, {1, 0, 0}, {1, 2, 1}, {1, 0, 1}});
        CHECK(permutation_importance(m, C, std::vector<int>{1, 0, 1, 0}, 0, 5, 13) == 0.0);
    }
    SUBCASE("deterministic per seed and batched form agrees") {
        const double a = permutation_importance(m, X, y, 0, 7, 99);
        CHECK(permutation_importance(m, X, y, 0, 7, 99) == a);
        const auto all = permutation_importances(m, X, y, 7, 99);
        REQUIRE(all.size() == 3);
        CHECK(all[0] == a);
        CHECK(all[1] == 0.0);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(permutation_importance(m, X, y, 0, 0, 1), ConfigError);
        CHECK_THROWS_AS(permutation_importance(m, X, y, 3, 1, 1), ConfigError);
        CHECK_THROWS_AS(permutation_importance(m, X, std::vector<int>{1, 0}, 0, 1, 1), ConfigError);
    }
}

TEST_CASE("permutation importance converges to the exact permutation mean") {
    LogisticModel m;
    m.w = Eigen::VectorXd::Zero(2);
    m.w << 1.5, -1.0;
    m.b = -0.7;
    const auto X = dense_matrix({{1, 0}, {0, 1}, {2, 1}, {0, 0}, {1, 1}});
    const std::vector<int> y{1, 0, 1, 0, 0};
    const double base = macro_f1_of(m, X, y);

    for (std::size_t feature : {std::size_t{0}, std::size_t{1}}) {
        std::vector<double> col(5);
        for (std::size_t i = 0; i < 5; ++i) col[i] = X.column(static_cast<std::uint32_t>(feature))[i];
        std::vector<std::size_t> perm(5);
        std::iota(perm.begin(), perm.end(), 0);
        double total = 0;
        int count = 0;
        do {
            std::vector<std::vector<double>> rows(5, std::vector<double>(2));
            for (std::size_t i = 0; i < 5; ++i) {
                rows[i][0] = X.column(0)[i];
                rows[i][1] = X.column(1)[i];
                rows[i][feature] = col[perm[i]];
            }
            total += macro_f1_of(m, dense_matrix(rows), y);
            ++count;
        } while (std::next_permutation(perm.begin(), perm.end()));
        const double exact = base - total / count;
        const double estimate = permutation_importance(m, X, y, feature, 40000, 5);
        CHECK(exact > 0.05);
        CHECK(std::abs(estimate - exact) < 0.01);
    }
}

TEST_CASE("permutation importance is stable across seeds on 1,000 rows") {
    Rng rng(21);
    const std::size_t n = 1000, d = 6;
    LogisticModel m;
    m.w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    m.w << 3.0, -2.0, 1.0, 0.5, 0.0, -0.25;
    SparseMatrix X;
    X.cols = d;
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row(d);
        double z = 0;
        for (std::size_t j = 0; j < d; ++j) {
            row[j] = rng.below(3) == 0 ? 0.0 : rng.uniform();
            z += m.w[static_cast<Eigen::Index>(j)] * row[j];
        }
        X.rows.push_back(dense_row(row));
        y.push_back(z + 0.3 * (rng.uniform() - 0.5) > 0.4 ? 1 : 0);
    }
    m.b = -0.4;
    const auto a = permutation_importances(m, X, y, 5, 1);
    const auto b = permutation_importances(m, X, y, 5, 2);
    for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(a[j] - b[j]) < 0.02);
    CHECK(a[0] > a[3]);
    CHECK(a[4] == 0.0);
}

TEST_CASE("planted token has the largest permutation weight") {
    const auto& f = fitted();
    const auto top = top_features(f.clf, f.recs, Task::EI, 2, 5, 13);
    std::vector<std::string> first{top.positive[0].term, top.positive[1].term};
    std::sort(first.begin(), first.end());
    CHECK(first[0] == "alpha");
    CHECK(first[1] == "omega");
    CHECK(top.positive[1].weight > 0.0);
}

TEST_CASE("top_features") {
    const auto& f = fitted();
    const std::size_t m = f.clf.selector().selected.size();

    SUBCASE("raw coefficients put the markers at the two ends") {
        const auto top = top_features(f.clf, f.recs, Task::EI, 10, 0, 13);
        REQUIRE(top.positive.size() == 10);
        REQUIRE(top.negative.size() == 10);
        CHECK(top.positive[0].term == "omega");
        CHECK(top.negative.back().term == "alpha");
        for (const auto& fw : top.positive) CHECK(fw.weight == fw.coefficient);
    }
    SUBCASE("sorted by weight, ties by term") {
        std::vector<double> w(m, 0.0);
        w[0] = 1.0;
        w[m - 1] = -1.0;
        const auto top = top_features(f.clf, w, m - 1);
        for (std::size_t i = 1; i < top.positive.size(); ++i) {
            const auto& a = top.positive[i - 1];
            const auto& b = top.positive[i];
            CHECK((a.weight > b.weight || (a.weight == b.weight && a.term < b.term)));
        }
        CHECK(top.positive[0].term == f.clf.term(0));
        CHECK(top.negative.back().term == f.clf.term(m - 1));
    }
    SUBCASE("n beyond the feature count returns the full ranking") {
        const auto top = top_features(f.clf, f.recs, Task::EI, m + 5, 0, 13);
        CHECK(top.positive.size() == m);
        CHECK(top.negative.size() == m);
    }
    SUBCASE("invariant to document order") {
        auto reversed = f.recs;
        std::reverse(reversed.begin(), reversed.end());
        Rng rng(4);
        auto shuffled = f.recs;
        rng.shuffle(shuffled.begin(), shuffled.end());
        const auto a = top_features(f.clf, f.recs, Task::EI, 5, 3, 9);
        for (const auto& order : {reversed, shuffled}) {
            const auto b = top_features(f.clf, order, Task::EI, 5, 3, 9);
            for (std::size_t i = 0; i < 5; ++i) {
                CHECK(a.positive[i].term == b.positive[i].term);
                CHECK(a.positive[i].weight == b.positive[i].weight);
            }
        }
    }
    SUBCASE("weight count mismatch") {
        std::vector<double> w(m + 1, 0.0);
        CHECK_THROWS_AS(top_features(f.clf, w, 3), ConfigError);
    }
}

TEST_CASE("term_importance of an unselected feature is exactly zero") {
    const auto& f = fitted();
    const auto& sel = f.clf.selector().selected;
    const auto vocab = f.clf.tfidf().vocab.terms.size();
    std::size_t checked = 0;
    for (std::size_t v = 0; v < vocab && checked < 20; ++v) {
        if (std::binary_search(sel.begin(), sel.end(), static_cast<std::uint32_t>(v))) continue;
        CHECK(term_importance(f.clf, f.recs, Task::EI, v, 5, 1) == 0.0);
        ++checked;
    }
    const auto j = selected_index(f.clf, "omega");
    REQUIRE(j != SIZE_MAX);
    CHECK(term_importance(f.clf, f.recs, Task::EI, sel[j], 5, 1) > 0.0);
}

TEST_CASE("highlight sum rule") {
    const auto& f = fitted();
    auto o = small_planted();
    o.seed = 77;
    o.docs = 100;
    const auto probe = testing::planted_corpus(o);
    std::size_t correct = 0, marker_max = 0;
    for (const auto& r : probe.records()) {
        const auto h = highlight_document(f.clf, r.doc.tokens);
        const double logit = f.clf.model().decision(f.clf.features(r.doc.tokens));
        double sum = h.bias;
        for (const auto& s : h.spans) sum += s.contribution;
        CHECK(std::abs(sum - logit) <= 1e-9);
        CHECK(std::abs(h.logit - logit) <= 1e-9);
        CHECK(h.predicted == (logit > 0.0 ? 1 : 0));
        for (const auto& s : h.spans) {
            CHECK(s.begin < s.end);
            CHECK(s.end <= h.tokens.size());
        }
        if (h.predicted != r.labels.ei) continue;
        ++correct;
        const auto best = std::max_element(h.spans.begin(), h.spans.end(), [](const auto& a, const auto& b) {
            return std::abs(a.contribution) < std::abs(b.contribution);
        });
        if (best != h.spans.end() && best->term == testing::kMarkers[static_cast<std::size_t>(r.labels.ei)]) ++marker_max;
    }
    REQUIRE(correct > 0);
    CHECK(static_cast<double>(marker_max) >= 0.95 * static_cast<double>(correct));
}

TEST_CASE("highlight edge cases") {
    const auto& f = fitted();
    SUBCASE("single in-vocabulary token carries the whole non-bias logit") {
        const auto h = highlight_document(f.clf, {"omega"});
        REQUIRE(h.spans.size() == 1);
        CHECK(h.spans[0].begin == 0);
        CHECK(h.spans[0].end == 1);
        CHECK(std::abs(h.spans[0].contribution - (h.logit - h.bias)) <= 1e-12);
        CHECK(h.predicted == 1);
    }
    SUBCASE("all-OOV document") {
        const auto h = highlight_document(f.clf, {"zzzunseen", "qqqunseen"});
        CHECK(h.spans.empty());
        CHECK(h.logit == h.bias);
        const auto empty = highlight_document(f.clf, {});
        CHECK(empty.spans.empty());
        CHECK(empty.logit == empty.bias);
    }
    SUBCASE("repeated tokens share the contribution") {
        const auto h = highlight_document(f.clf, {"omega", "w1", "omega"});
        double omega = 0;
        std::size_t n = 0;
        for (const auto& s : h.spans)
            if (s.term == "omega") {
                omega = s.contribution;
                ++n;
            }
        CHECK(n == 2);
        CHECK(omega > 0.0);
    }
    SUBCASE("render") {
        Highlight h;
        h.tokens = {"i", "am", "omega"};
        h.spans.push_back({2, 3, "omega", 1.234});
        h.spans.push_back({0, 2, "i am", -0.5});
        h.bias = -0.1;
        h.logit = 0.634;
        h.predicted = 1;
        CHECK(render_highlight(h, Task::EI) == "predicted=I logit=+0.634000 bias=-0.100000\n[i:-0.25] [am:-0.25] [omega:+1.23]\n");
    }
}

TEST_CASE("weights table layout") {
    TopFeatures a, b;
    a.positive = {{"x", 0.5, 1.0}, {"y", 0.25, 0.5}};
    a.negative = {{"z", -0.25, -1.0}};
    b.positive = {{"p", 0.125, 0.0}};
    b.negative = {{"q", -0.5, 0.0}};
    const std::vector<Task> tasks{Task::EI, Task::NS};
    const std::vector<TopFeatures> fs{a, b};
    CHECK(render_weights_tsv(tasks, fs) ==
          "Weight\tEI\tWeight\tNS\n"
          "+0.500000\tx\t+0.125000\tp\n"
          "+0.250000\ty\t\t\n"
          "...\t...\t...\t...\n"
          "-0.250000\tz\t-0.500000\tq\n");
    CHECK_THROWS_AS(render_weights_tsv(tasks, std::vector<TopFeatures>{a}), ConfigError);
}
