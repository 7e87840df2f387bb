#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <doctest.h>

#include "gradcheck.hpp"
#include "mbti/adam.hpp"
#include "mbti/error.hpp"
#include "mbti/log.hpp"
#include "mbti/metrics.hpp"
#include "mbti/random.hpp"
#include "mbti/seqnet.hpp"

using namespace mbti;
using testing::numeric_gradient;
using testing::rel_error;

namespace {

SeqNetConfig small_config(bool attention_first = false) {
    SeqNetConfig c;
    c.input_dim = 4;
    c.hidden = 3;
    c.attention = 3;
    c.dense = 4;
    c.dropout = 0.0;
    c.attention_first = attention_first;
    return c;
}

EmbeddedSequence random_sequence(Rng& rng, std::size_t max_len, std::size_t length, int dim) {
    EmbeddedSequence s;
    s.x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(max_len), dim);
    s.mask.assign(max_len, 0);
    s.length = length;
    for (std::size_t t = 0; t < length; ++t) {
        s.mask[t] = 1;
        for (int k = 0; k < dim; ++k) s.x(static_cast<Eigen::Index>(t), k) = rng.normal();
    }
    return s;
}

void perturb(SeqNetModel& m, Rng& rng) {
    for (auto* blk : m.params.blocks())
        for (Eigen::Index i = 0; i < blk->size(); ++i) blk->data()[i] += 0.1 * rng.normal();
}

/// Sequences of one repeated token vector per class.
struct ToyData {
    std::vector<EmbeddedSequence> x;
    std::vector<int> y;
};

ToyData disjoint_token_data(std::size_t n, int dim, std::uint64_t seed) {
    Rng rng(seed);
    std::array<Eigen::RowVectorXd, 2> token;
    for (auto& t : token) {
        t = Eigen::RowVectorXd(dim);
        for (int k = 0; k < dim; ++k) t[k] = rng.uniform(-0.5, 0.5);
    }
    ToyData d;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % 2);
        const std::size_t len = 1 + rng.below(6);
        EmbeddedSequence s;
        s.x = Eigen::MatrixXd::Zero(8, dim);
        s.mask.assign(8, 0);
        s.length = len;
        for (std::size_t t = 0; t < len; ++t) {
            s.mask[t] = 1;
            s.x.row(static_cast<Eigen::Index>(t)) = token[static_cast<std::size_t>(y)];
        }
        d.x.push_back(s);
        d.y.push_back(y);
    }
    return d;
}

} // namespace

TEST_CASE("init_seqnet") {
    const auto m = init_seqnet(SeqNetConfig{}, 1);
    REQUIRE(m.params.lstm.size() == 2);
    CHECK(m.params.lstm[0].W.rows() == 60);
    CHECK(m.params.lstm[0].W.cols() == 300);
    CHECK(m.params.lstm[1].W.cols() == 15);
    CHECK(m.params.attention.W.rows() == 15);
    CHECK(m.params.hidden.W.rows() == 64);
    CHECK(m.params.output.W.rows() == 2);
    for (const auto& l : m.params.lstm) {
        CHECK(l.b.block(15, 0, 15, 1).isConstant(1.0));
        CHECK(l.b.block(0, 0, 15, 1).isZero(0.0));
    }
    CHECK(m.params.block_names().size() == m.params.blocks().size());
}

TEST_CASE("seqnet_forward") {
    Rng rng(3);
    SUBCASE("all-zero parameters give (0.5, 0.5)") {
        auto m = init_seqnet(small_config(), 1);
        for (auto* b : m.params.blocks()) b->setZero();
        const auto out = seqnet_forward(m, random_sequence(rng, 5, 4, 4));
        CHECK(out.probs[0] == 0.5);
        CHECK(out.probs[1] == 0.5);
    }
    SUBCASE("single real position takes all the attention") {
        const auto m = init_seqnet(small_config(), 2);
        const auto out = seqnet_forward(m, random_sequence(rng, 5, 1, 4));
        CHECK(out.attention[0] == 1.0);
        for (std::size_t t = 1; t < 5; ++t) CHECK(out.attention[t] == 0.0);
    }
    SUBCASE("probabilities and attention weights are distributions") {
        for (bool first : {false, true})
            for (int trial = 0; trial < 50; ++trial) {
                auto m = init_seqnet(small_config(first), static_cast<std::uint64_t>(trial));
                perturb(m, rng);
                const auto s = random_sequence(rng, 7, 1 + rng.below(7), 4);
                const auto out = seqnet_forward(m, s);
                CHECK(std::abs(out.probs[0] + out.probs[1] - 1.0) <= 1e-9);
                CHECK(out.probs[0] > 0.0);
                CHECK(out.probs[0] < 1.0);
                const double sum = std::accumulate(out.attention.begin(), out.attention.end(), 0.0);
                CHECK(std::abs(sum - 1.0) <= 1e-9);
                for (std::size_t t = s.length; t < 7; ++t) CHECK(out.attention[t] == 0.0);
            }
    }
    SUBCASE("appending masked padding does not change the output") {
        for (bool first : {false, true}) {
            auto m = init_seqnet(small_config(first), 4);
            perturb(m, rng);
            const auto s = random_sequence(rng, 4, 3, 4);
            auto padded = s;
            padded.x.conservativeResize(10, 4);
            padded.x.bottomRows(6).setRandom();
            padded.mask.resize(10, 0);
            const auto a = seqnet_forward(m, s);
            const auto b = seqnet_forward(m, padded);
            CHECK(std::abs(a.probs[1] - b.probs[1]) <= 1e-9);
        }
    }
    SUBCASE("all-masked input pools a zero context") {
        const auto m = init_seqnet(small_config(), 5);
        const auto out = seqnet_forward(m, random_sequence(rng, 4, 0, 4));
        CHECK(std::abs(out.probs[0] + out.probs[1] - 1.0) <= 1e-12);
        for (double a : out.attention) CHECK(a == 0.0);
    }
    SUBCASE("dropout is the identity without a generator") {
        auto c = small_config();
        c.dropout = 0.5;
        const auto m = init_seqnet(c, 6);
        const auto s = random_sequence(rng, 5, 5, 4);
        CHECK(seqnet_forward(m, s).probs == seqnet_forward(m, s).probs);
        auto no_drop = m;
        no_drop.config.dropout = 0.0;
        CHECK(seqnet_forward(m, s).probs == seqnet_forward(no_drop, s).probs);
        Rng d(1);
        bool changed = false;
        for (int i = 0; i < 20 && !changed; ++i) changed = seqnet_forward(m, s, &d).probs != seqnet_forward(m, s).probs;
        CHECK(changed);
    }
}

TEST_CASE("seqnet gradients match central differences on every block") {
    Rng rng(5);
    for (bool first : {false, true}) {
        auto model = init_seqnet(small_config(first), 11);
        perturb(model, rng);
        std::vector<EmbeddedSequence> seqs;
        for (std::size_t s = 0; s < 3; ++s) seqs.push_back(random_sequence(rng, 5, 5 - s, 4));
        const std::vector<const EmbeddedSequence*> batch{&seqs[0], &seqs[1], &seqs[2]};
        const std::vector<int> labels{0, 1, 1};
        auto grads = model.params.zeros_like();
        seqnet_gradients(model, batch, labels, grads);
        auto loss = [&] {
            auto scratch = model.params.zeros_like();
            return seqnet_gradients(model, batch, labels, scratch);
        };
        const auto names = model.params.block_names();
        auto blocks = model.params.blocks();
        const auto gblocks = grads.blocks();
        for (std::size_t k = 0; k < blocks.size(); ++k) {
            INFO(names[k], first ? " (attention first)" : "");
            CHECK(rel_error(*gblocks[k], numeric_gradient(*blocks[k], loss)) < 1e-4);
        }
    }
}

TEST_CASE("seqnet gradient properties") {
    Rng rng(8);
    auto model = init_seqnet(small_config(), 3);
    perturb(model, rng);
    SUBCASE("zero input gives zero input-weight gradients") {
        auto s = random_sequence(rng, 5, 4, 4);
        s.x.setZero();
        const std::vector<const EmbeddedSequence*> batch{&s};
        auto grads = model.params.zeros_like();
        seqnet_gradients(model, batch, std::vector<int>{1}, grads);
        CHECK(grads.lstm[0].W.isZero(0.0));
        CHECK_FALSE(grads.lstm[0].U.isZero(0.0));
    }
    SUBCASE("duplicating the batch leaves the mean loss unchanged") {
        const auto a = random_sequence(rng, 5, 5, 4);
        const auto b = random_sequence(rng, 5, 2, 4);
        const std::vector<const EmbeddedSequence*> once{&a, &b};
        const std::vector<const EmbeddedSequence*> twice{&a, &b, &a, &b};
        auto g1 = model.params.zeros_like();
        auto g2 = model.params.zeros_like();
        const double l1 = seqnet_gradients(model, once, std::vector<int>{0, 1}, g1);
        const double l2 = seqnet_gradients(model, twice, std::vector<int>{0, 1, 0, 1}, g2);
        CHECK(l1 == doctest::Approx(l2).epsilon(1e-14));
    }
    SUBCASE("non-finite gradients name the block") {
        auto broken = model;
        broken.params.output.b(0, 0) = std::nan("");
        const auto s = random_sequence(rng, 5, 5, 4);
        const std::vector<const EmbeddedSequence*> batch{&s};
        auto grads = model.params.zeros_like();
        CHECK_THROWS_AS(seqnet_gradients(broken, batch, std::vector<int>{1}, grads), NumericError);
    }
}

TEST_CASE("fit_seqnet") {
    set_quiet(true);
    SeqNetConfig arch = small_config();
    arch.input_dim = 6;
    arch.hidden = 8;
    arch.attention = 8;
    arch.dense = 16;
    arch.dropout = 0.2;
    SeqTrainConfig cfg;
    cfg.max_epochs = 30;
    cfg.batch_size = 8;
    cfg.adam.lr = 0.01;

    SUBCASE("separable toy set reaches training accuracy 1 within 30 epochs") {
        const auto d = disjoint_token_data(40, 6, 1);
        const auto m = fit_seqnet(d.x, d.y, {}, {}, arch, cfg);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < d.x.size(); ++i) {
            const auto p = seqnet_forward(m, d.x[i]).probs;
            correct += static_cast<std::size_t>((p[1] > p[0] ? 1 : 0) == d.y[i]);
        }
        CHECK(correct == d.x.size());
    }
    SUBCASE("fixed seed gives identical parameters") {
        const auto d = disjoint_token_data(40, 6, 2);
        const auto dev = disjoint_token_data(10, 6, 2);
        const auto a = fit_seqnet(d.x, d.y, dev.x, dev.y, arch, cfg);
        const auto b = fit_seqnet(d.x, d.y, dev.x, dev.y, arch, cfg);
        const auto pa = a.params.blocks();
        const auto pb = b.params.blocks();
        for (std::size_t k = 0; k < pa.size(); ++k) CHECK(*pa[k] == *pb[k]);
    }
    SUBCASE("shuffled labels leave dev macro-F1 below 0.65") {
        std::vector<double> scores;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            // Distinct random tokens per sequence: nothing generalises.
            Rng rng(seed);
            auto make = [&](std::size_t n) {
                ToyData d;
                for (std::size_t i = 0; i < n; ++i) {
                    d.x.push_back(random_sequence(rng, 8, 1 + rng.below(8), 6));
                    d.y.push_back(static_cast<int>(i % 2));
                }
                rng.shuffle(d.y.begin(), d.y.end());
                return d;
            };
            const auto train = make(40);
            const auto dev = make(200);
            SeqTrainConfig c = cfg;
            c.seed = seed;
            const auto m = fit_seqnet(train.x, train.y, {}, {}, arch, c);
            std::vector<int> pred;
            for (const auto& s : dev.x) {
                const auto p = seqnet_forward(m, s).probs;
                pred.push_back(p[1] > p[0] ? 1 : 0);
            }
            scores.push_back(macro_f1(dev.y, pred));
        }
        std::sort(scores.begin(), scores.end());
        CHECK(scores[2] < 0.65);
    }
    SUBCASE("empty dev set trains for max_epochs") {
        const auto d = disjoint_token_data(20, 6, 3);
        SeqTrainConfig c = cfg;
        c.max_epochs = 4;
        SeqFitLog log;
        fit_seqnet(d.x, d.y, {}, {}, arch, c, &log);
        CHECK_FALSE(log.used_dev);
        CHECK(log.epochs_run == 4);
    }
    SUBCASE("early stopping honours patience") {
        const auto d = disjoint_token_data(40, 6, 4);
        const auto dev = disjoint_token_data(20, 6, 4);
        SeqFitLog log;
        fit_seqnet(d.x, d.y, dev.x, dev.y, arch, cfg, &log);
        CHECK(log.used_dev);
        CHECK(log.epochs_run <= log.best_epoch + cfg.patience);
    }
}

TEST_CASE("Adam matches the closed form of its first step") {
    struct P {
        Eigen::MatrixXd a;
        std::vector<Eigen::MatrixXd*> blocks() { return {&a}; }
    };
    P p{Eigen::MatrixXd::Constant(2, 2, 1.0)};
    P g{Eigen::MatrixXd::Constant(2, 2, 0.3)};
    Adam<P> opt(p, AdamConfig{});
    opt.step(p, g);
    // m_hat = g and v_hat = g^2, so the step is lr * g / (|g| + eps).
    CHECK(p.a(0, 0) == doctest::Approx(1.0 - 1e-3 * 0.3 / (0.3 + 1e-8)).epsilon(1e-14));
    CHECK(opt.steps() == 1);
}
