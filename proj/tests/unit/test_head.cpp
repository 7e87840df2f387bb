#include <algorithm>
#include <filesystem>
#include <memory>
#include <vector>

#include <doctest.h>

#include "gradcheck.hpp"
#include "mbti/head.hpp"
#include "mbti/log.hpp"
#include "mbti/metrics.hpp"
#include "mbti/models.hpp"
#include "mbti/random.hpp"
#include "planted.hpp"

using namespace mbti;
using testing::numeric_gradient;
using testing::rel_error;
namespace fs = std::filesystem;

namespace {

const fs::path kTiny = fs::path(MBTI_FIXTURE_DIR) / "tiny_distilbert";

std::vector<const Record*> pointers(const Dataset& ds, std::size_t lo, std::size_t hi) {
    std::vector<const Record*> out;
    for (std::size_t i = lo; i < hi; ++i) out.push_back(&ds[i]);
    return out;
}

} // namespace

TEST_CASE("head shapes and initial prediction") {
    const auto m = init_head(768, HeadConfig{}, 1, true);
    CHECK(m.params.W1.rows() == 512);
    CHECK(m.params.W1.cols() == 768);
    CHECK(m.params.W2.rows() == 2);
    Rng rng(1);
    Eigen::VectorXd x(768);
    for (int i = 0; i < 768; ++i) x[i] = rng.normal();
    const auto p = head_forward(m, x);
    CHECK(p[0] == 0.5);
    CHECK(p[1] == 0.5);
}

TEST_CASE("head outputs") {
    Rng rng(2);
    auto m = init_head(10, HeadConfig{16, 0.5}, 3);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd x(10);
        for (int i = 0; i < 10; ++i) x[i] = 3.0 * rng.normal();
        const auto p = head_forward(m, x);
        CHECK(std::abs(p[0] + p[1] - 1.0) <= 1e-9);
        CHECK(head_forward(m, x) == p);
    }
}

TEST_CASE("head gradients match central differences") {
    Rng rng(4);
    HeadConfig hc{6, 0.0};
    auto head = init_head(5, hc, 3);
    for (auto* blk : head.params.blocks())
        for (Eigen::Index i = 0; i < blk->size(); ++i) blk->data()[i] += 0.1 * rng.normal();
    std::vector<Eigen::VectorXd> xs(4, Eigen::VectorXd(5));
    for (auto& x : xs)
        for (int i = 0; i < 5; ++i) x[i] = rng.normal();
    const std::vector<const Eigen::VectorXd*> batch{&xs[0], &xs[1], &xs[2], &xs[3]};
    const std::vector<int> labels{0, 1, 0, 1};
    auto grads = head.params.zeros_like();
    std::vector<Eigen::VectorXd> input_grads;
    head_gradients(head, batch, labels, grads, nullptr, &input_grads);
    auto loss = [&] {
        auto scratch = head.params.zeros_like();
        return head_gradients(head, batch, labels, scratch);
    };
    const auto names = head.params.block_names();
    auto blocks = head.params.blocks();
    const auto gblocks = grads.blocks();
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        INFO(names[k]);
        CHECK(rel_error(*gblocks[k], numeric_gradient(*blocks[k], loss)) < 1e-5);
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        Eigen::MatrixXd xi = xs[i];
        auto loss_x = [&] {
            xs[i] = xi;
            auto scratch = head.params.zeros_like();
            return head_gradients(head, batch, labels, scratch);
        };
        const auto num = numeric_gradient(xi, loss_x);
        xs[i] = xi;
        CHECK(rel_error(input_grads[i], num) < 1e-5);
    }
}

TEST_CASE("fit_head on the planted corpus under the stub encoder") {
    set_quiet(true);
    testing::PlantedOptions o;
    o.filler_tokens = 20;
    const auto ds = testing::planted_corpus(o);
    const StubEncoder stub(13);
    EncoderConfig ec;
    ec.pooling = Pooling::mean;
    std::vector<Eigen::VectorXd> x;
    std::vector<int> y;
    for (const auto& r : ds.records()) {
        x.push_back(encode_text(encoder_text(r.doc), stub, ec));
        y.push_back(r.labels.ei);
    }
    const std::span<const Eigen::VectorXd> xs(x);
    const std::span<const int> ys(y);
    HeadTrainConfig cfg;
    HeadFitLog log;
    const auto m = fit_head(xs.subspan(0, 180), ys.subspan(0, 180), xs.subspan(180, 20), ys.subspan(180, 20), HeadConfig{},
                            cfg, &log);
    std::vector<int> pred;
    for (std::size_t i = 200; i < 300; ++i) pred.push_back(argmax2(head_forward(m, x[i])));
    CHECK(macro_f1(ys.subspan(200, 100), pred) >= 0.95);
    CHECK(log.epochs_run <= log.best_epoch + cfg.patience);

    const auto again = fit_head(xs.subspan(0, 180), ys.subspan(0, 180), xs.subspan(180, 20), ys.subspan(180, 20),
                                HeadConfig{}, cfg);
    CHECK(again.params.W1 == m.params.W1);
    CHECK(again.params.b2 == m.params.b2);
}

TEST_CASE("encoder classifier modes") {
    set_quiet(true);
    testing::PlantedOptions o;
    o.docs = 60;
    o.filler_tokens = 6;
    const auto ds = testing::planted_corpus(o);
    const auto train = pointers(ds, 0, 50);
    const auto test = pointers(ds, 50, 60);
    std::shared_ptr<const ContextualEncoder> enc = TransformerEncoder::load(kTiny / "model.safetensors", kTiny / "vocab.txt");
    EncoderConfig ec;
    ec.max_tokens = 16;
    HeadTrainConfig tc;
    tc.max_epochs = 3;
    const HeadConfig hc{16, 0.5};

    SUBCASE("frozen mode never touches the encoder weights") {
        const auto before = enc->checksum();
        EncoderClassifier clf(enc, nullptr, ec, hc, tc, 2e-5, 0.1);
        clf.fit(train, Task::EI, 1);
        clf.predict(test);
        CHECK(enc->checksum() == before);
        CHECK(clf.encoder().checksum() == before);
    }
    SUBCASE("fine-tune mode updates a copy of the encoder") {
        const auto before = enc->checksum();
        ec.frozen = false;
        EncoderClassifier clf(enc, nullptr, ec, hc, tc, 1e-3, 0.1);
        clf.fit(train, Task::EI, 1);
        CHECK(enc->checksum() == before);
        CHECK(clf.encoder().checksum() != before);
        for (const auto& p : clf.predict(test)) CHECK(std::isfinite(p.p1));
    }
}
