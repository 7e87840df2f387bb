#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include <doctest.h>
#include <fmt/format.h>

#include "mbti/error.hpp"
#include "mbti/random.hpp"
#include "mbti/word2vec.hpp"

using namespace mbti;
namespace fs = std::filesystem;

namespace {

Eigen::VectorXd random_vec(Rng& rng, int d, double scale = 1.0) {
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v[i] = scale * rng.normal();
    return v;
}

double sgns_loss(const Eigen::VectorXd& c, const Eigen::VectorXd& ctx, const std::vector<Eigen::VectorXd>& neg) {
    return sgns_gradients(c, ctx, neg).loss;
}

double rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm() / (a.norm() + b.norm()); }

/// Sentences "a b a b ..." and "x y x y ...", never mixed.
std::vector<TokenList> two_topic_corpus(int sentences, int length) {
    std::vector<TokenList> out;
    for (int s = 0; s < sentences; ++s) {
        TokenList t;
        for (int i = 0; i < length; ++i)
            t.push_back(s % 2 == 0 ? (i % 2 == 0 ? "a" : "b") : (i % 2 == 0 ? "x" : "y"));
        out.push_back(t);
    }
    return out;
}

} // namespace

TEST_CASE("build_vocab") {
    SUBCASE("sampling ratio follows count^0.75") {
        std::vector<TokenList> corpus{TokenList(16, "a"), TokenList{"b"}};
        const auto v = build_vocab(corpus, 1);
        CHECK(v.sampling_prob[static_cast<std::size_t>(v.find("a"))] /
                  v.sampling_prob[static_cast<std::size_t>(v.find("b"))] ==
              doctest::Approx(8.0).epsilon(1e-12));
    }
    SUBCASE("min_count drops hapaxes") {
        std::vector<TokenList> corpus{{"a", "a", "b", "c", "c"}};
        const auto v = build_vocab(corpus, 2);
        CHECK(v.size() == 2);
        CHECK(v.find("b") == -1);
        CHECK_THROWS_AS(build_vocab(corpus, 5), DataError);
    }
    SUBCASE("probabilities are normalised and proportional to count^0.75") {
        Rng rng(4);
        std::vector<TokenList> corpus(1);
        for (int i = 0; i < 5000; ++i) corpus[0].push_back(fmt::format("w{}", rng.below(200) * rng.below(3)));
        const auto v = build_vocab(corpus, 1);
        double sum = 0, z = 0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            sum += v.sampling_prob[i];
            z += std::pow(static_cast<double>(v.counts[i]), 0.75);
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double want = std::pow(static_cast<double>(v.counts[i]), 0.75) / z;
            CHECK(std::abs(v.sampling_prob[i] - want) <= 1e-12 * want);
        }
        CHECK(std::is_sorted(v.counts.rbegin(), v.counts.rend()));
    }
    SUBCASE("sampling frequencies track the table") {
        std::vector<TokenList> corpus{TokenList(16, "a"), TokenList{"b"}};
        const auto v = build_vocab(corpus, 1);
        Rng rng(1);
        int hits = 0;
        for (int i = 0; i < 90000; ++i) hits += v.sample(rng) == v.find("a");
        CHECK(hits / 90000.0 == doctest::Approx(8.0 / 9.0).epsilon(0.01));
    }
}

TEST_CASE("sgns gradients") {
    Rng rng(7);
    SUBCASE("match central differences") {
        for (int trial = 0; trial < 10; ++trial) {
            const int d = 6;
            Eigen::VectorXd c = random_vec(rng, d, 0.5), ctx = random_vec(rng, d, 0.5);
            std::vector<Eigen::VectorXd> neg{random_vec(rng, d, 0.5), random_vec(rng, d, 0.5)};
            const auto g = sgns_gradients(c, ctx, neg);
            const double h = 1e-6;
            auto numeric = [&](Eigen::VectorXd& p) {
                Eigen::VectorXd out(d);
                for (int i = 0; i < d; ++i) {
                    const double keep = p[i];
                    p[i] = keep + h;
                    const double up = sgns_loss(c, ctx, neg);
                    p[i] = keep - h;
                    const double down = sgns_loss(c, ctx, neg);
                    p[i] = keep;
                    out[i] = (up - down) / (2 * h);
                }
                return out;
            };
            CHECK(rel(g.d_center, numeric(c)) < 1e-5);
            CHECK(rel(g.d_context, numeric(ctx)) < 1e-5);
            CHECK(rel(g.d_negatives[0], numeric(neg[0])) < 1e-5);
            CHECK(rel(g.d_negatives[1], numeric(neg[1])) < 1e-5);
        }
    }
    SUBCASE("saturated positive pair has a vanishing gradient") {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(3), ctx = Eigen::VectorXd::Zero(3);
        c[0] = 5.0;
        ctx[0] = 6.0; // dot = 30
        const auto g = sgns_gradients(c, ctx, {});
        CHECK(g.d_context.norm() < 1e-6);
        CHECK(g.d_center.norm() < 1e-6);
    }
    SUBCASE("zero vectors give a zero positive-pair gradient") {
        const Eigen::VectorXd z = Eigen::VectorXd::Zero(4);
        const auto g = sgns_gradients(z, z, {});
        CHECK(g.loss == doctest::Approx(std::log(2.0)));
        CHECK(g.d_center.norm() == 0.0);
        CHECK(g.d_context.norm() == 0.0);
    }
}

TEST_CASE("sgns_step moves along the negative gradient") {
    std::vector<TokenList> corpus{{"a", "b", "c", "d"}};
    auto table = init_embeddings(build_vocab(corpus, 1), 5, 3);
    Rng rng(2);
    for (int i = 0; i < table.output.rows(); ++i)
        for (int j = 0; j < 5; ++j) table.output(i, j) = 0.1 * rng.normal();
    const Eigen::VectorXd c = table.input.row(0).transpose();
    const Eigen::VectorXd ctx = table.output.row(1).transpose();
    const std::vector<Eigen::VectorXd> neg{table.output.row(2).transpose()};
    const auto g = sgns_gradients(c, ctx, neg);
    const std::vector<int> negs{2};
    const double loss = sgns_step(table, 0, 1, negs, 0.1);
    CHECK(loss == doctest::Approx(g.loss));
    CHECK(rel(Eigen::VectorXd(table.input.row(0).transpose()), c - 0.1 * g.d_center) < 1e-12);
    CHECK(rel(Eigen::VectorXd(table.output.row(1).transpose()), ctx - 0.1 * g.d_context) < 1e-12);
}

TEST_CASE("init_embeddings") {
    std::vector<TokenList> corpus{{"a", "b", "c"}};
    const auto t = init_embeddings(build_vocab(corpus, 1), 50, 9);
    CHECK(t.input.cwiseAbs().maxCoeff() <= 0.5 / 50);
    CHECK(t.output.isZero(0.0));
    CHECK(t.input.rows() == 3);
}

TEST_CASE("train_skipgram") {
    W2vConfig cfg;
    cfg.dim = 20;
    cfg.min_count = 1;
    cfg.epochs = 1;

    SUBCASE("empty documents leave the initialisation untouched") {
        std::vector<TokenList> vocab_src{{"a", "b", "a"}};
        auto table = init_embeddings(build_vocab(vocab_src, 1), cfg.dim, cfg.seed);
        const auto before = table.input;
        std::vector<TokenList> empty(5);
        train_skipgram(table, empty, cfg);
        CHECK(table.input == before);
        CHECK(table.output.isZero(0.0));
    }
    SUBCASE("single worker is deterministic") {
        const auto corpus = two_topic_corpus(40, 20);
        const auto a = train_skipgram(corpus, cfg);
        const auto b = train_skipgram(corpus, cfg);
        CHECK(a.input == b.input);
        CHECK(a.output == b.output);
    }
    SUBCASE("co-occurring words end up closer than words that never meet") {
        // Median over five seeds.
        std::vector<int> wins;
        W2vConfig c = cfg;
        c.dim = 50;
        c.epochs = 5;
        const auto corpus = two_topic_corpus(400, 40);
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            c.seed = seed;
            const auto t = train_skipgram(corpus, c);
            wins.push_back(cosine(t.vector("a"), t.vector("b")) > cosine(t.vector("a"), t.vector("x")));
        }
        std::sort(wins.begin(), wins.end());
        CHECK(wins[2] == 1);
    }
    SUBCASE("invalid configuration") {
        W2vConfig bad = cfg;
        bad.window = 0;
        CHECK_THROWS_AS(train_skipgram(two_topic_corpus(2, 4), bad), ConfigError);
    }
}

TEST_CASE("cosine") {
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const auto a = random_vec(rng, 8), b = random_vec(rng, 8);
        CHECK(cosine(a, a) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(cosine(a, b) == cosine(b, a));
    }
}

TEST_CASE("embed_sequence") {
    std::vector<TokenList> corpus{{"a", "b", "c"}};
    auto table = init_embeddings(build_vocab(corpus, 1), 300, 1);
    SUBCASE("empty input") {
        const auto e = embed_sequence(table, {}, 4);
        CHECK(e.x.rows() == 4);
        CHECK(e.x.cols() == 300);
        CHECK(e.x.isZero(0.0));
        CHECK(e.length == 0);
        CHECK(std::count(e.mask.begin(), e.mask.end(), 1) == 0);
    }
    SUBCASE("truncation keeps the first tokens") {
        TokenList t{"a", "b", "c", "a", "b", "c", "a", "b", "c", "a"};
        const auto e = embed_sequence(table, t, 4);
        CHECK(e.length == 4);
        CHECK(e.x.row(3) == table.input.row(table.vocab.find("a")));
    }
    SUBCASE("lookup is verbatim and OOV rows are zero") {
        const auto e = embed_sequence(table, {"a", "zzz"}, 3);
        CHECK(e.x.row(0) == table.input.row(table.vocab.find("a")));
        CHECK(e.x.row(1).isZero(0.0));
        CHECK(e.mask == std::vector<std::uint8_t>{1, 1, 0});
    }
}

TEST_CASE("text embedding format round-trips") {
    std::vector<TokenList> corpus{{"alpha", "beta"}};
    const auto table = init_embeddings(build_vocab(corpus, 1), 7, 3);
    const auto path = fs::temp_directory_path() / "mbti_unit_vectors.txt";
    save_text_embeddings(table, path);
    const auto back = load_text_embeddings(path);
    CHECK(back.vocab.words == table.vocab.words);
    CHECK((back.input - table.input).cwiseAbs().maxCoeff() == 0.0);
    fs::remove(path);
}
