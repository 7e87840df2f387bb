#include "mbti/head.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "mbti/error.hpp"
#include "mbti/log.hpp"
#include "mbti/metrics.hpp"
#include "mbti/random.hpp"

namespace mbti {

std::vector<Eigen::MatrixXd*> HeadParams::blocks() { return {&W1, &b1, &W2, &b2}; }

std::vector<std::string> HeadParams::block_names() const { return {"head.W1", "head.b1", "head.W2", "head.b2"}; }

HeadParams HeadParams::zeros_like() const {
    HeadParams z = *this;
    for (auto* b : z.blocks()) b->setZero();
    return z;
}

HeadModel init_head(int input_dim, const HeadConfig& config, std::uint64_t seed, bool zero_output) {
    if (input_dim < 1 || config.hidden < 1) throw ConfigError("head: sizes must be >= 1");
    if (!(config.dropout >= 0.0 && config.dropout < 1.0)) throw ConfigError("head: dropout must be in [0, 1)");
    HeadModel m;
    m.config = config;
    Rng rng(derive_seed(seed, 0x4EAD));
    auto glorot = [&](Eigen::MatrixXd& w, Eigen::Index rows, Eigen::Index cols) {
        w.resize(rows, cols);
        const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) w(i, j) = rng.uniform(-limit, limit);
    };
    glorot(m.params.W1, config.hidden, input_dim);
    m.params.b1 = Eigen::MatrixXd::Zero(config.hidden, 1);
    glorot(m.params.W2, 2, config.hidden);
    if (zero_output) m.params.W2.setZero();
    m.params.b2 = Eigen::MatrixXd::Zero(2, 1);
    return m;
}

namespace {

struct HeadCache {
    Eigen::VectorXd z1, drop, a1, probs;
};

std::array<double, 2> forward_impl(const HeadModel& m, const Eigen::VectorXd& x, Rng* rng, HeadCache& c) {
    if (x.size() != m.input_dim())
        throw ConfigError(fmt::format("head input width {} does not match {}", x.size(), m.input_dim()));
    const auto& p = m.params;
    c.z1 = p.W1 * x + p.b1.col(0);
    c.drop = Eigen::VectorXd::Ones(c.z1.size());
    if (rng && m.config.dropout > 0.0) {
        const double keep = 1.0 - m.config.dropout;
        for (Eigen::Index k = 0; k < c.drop.size(); ++k) c.drop[k] = rng->uniform() < keep ? 1.0 / keep : 0.0;
    }
    c.a1 = c.z1.cwiseMax(0.0).cwiseProduct(c.drop);
    const Eigen::VectorXd z2 = p.W2 * c.a1 + p.b2.col(0);
    const double mx = z2.maxCoeff();
    const double e0 = std::exp(z2[0] - mx), e1 = std::exp(z2[1] - mx);
    c.probs.resize(2);
    c.probs << e0 / (e0 + e1), e1 / (e0 + e1);
    return {c.probs[0], c.probs[1]};
}

/// Shared epoch loop: shuffles, runs `train_batch` per batch, evaluates dev
/// macro-F1 with `predict_dev`, and keeps the best state via `snapshot`.
template <class TrainBatch, class PredictDev, class Snapshot, class Restore>
void early_stopping_loop(std::size_t n_train, std::size_t n_dev, std::span<const int> dev_labels,
                         const HeadTrainConfig& config, HeadFitLog& lg, TrainBatch train_batch, PredictDev predict_dev,
                         Snapshot snapshot, Restore restore) {
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto bs = static_cast<std::size_t>(std::max(config.batch_size, 1));
    double best_f1 = -1.0;
    int since_best = 0;
    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        Rng rng(derive_seed(config.seed, 0xE90C, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order.begin(), order.end());
        double loss = 0.0;
        for (std::size_t start = 0; start < n_train; start += bs) {
            const auto stop = std::min(n_train, start + bs);
            std::span<const std::size_t> idx(order.data() + start, stop - start);
            try {
                loss += train_batch(idx, rng) * static_cast<double>(idx.size());
            } catch (const NumericError& e) {
                throw NumericError(fmt::format("epoch {} batch {}: {}", epoch, start / bs, e.what()));
            }
        }
        lg.epoch_loss.push_back(loss / static_cast<double>(n_train));
        lg.epochs_run = epoch + 1;
        if (n_dev == 0) continue;
        const std::vector<int> pred = predict_dev();
        const double f1 = macro_f1(dev_labels, pred);
        if (f1 > best_f1) {
            best_f1 = f1;
            snapshot();
            lg.best_epoch = epoch + 1;
            lg.best_dev_f1 = f1;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    if (n_dev == 0)
        lg.best_epoch = lg.epochs_run;
    else
        restore();
}

} // namespace

std::array<double, 2> head_forward(const HeadModel& model, const Eigen::VectorXd& x, Rng* dropout_rng) {
    HeadCache c;
    return forward_impl(model, x, dropout_rng, c);
}

double head_gradients(const HeadModel& model, std::span<const Eigen::VectorXd* const> batch, std::span<const int> labels,
                      HeadParams& grads, Rng* dropout_rng, std::vector<Eigen::VectorXd>* input_grads) {
    if (batch.size() != labels.size() || batch.empty()) throw ConfigError("head: batch and label counts differ or batch is empty");
    const auto& p = model.params;
    const double scale = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    HeadCache c;
    if (input_grads) input_grads->assign(batch.size(), {});
    for (std::size_t i = 0; i < batch.size(); ++i) {
        forward_impl(model, *batch[i], dropout_rng, c);
        const int y = labels[i] ? 1 : 0;
        loss -= std::log(std::max(c.probs[y], 1e-300)) * scale;
        Eigen::VectorXd dz2 = c.probs;
        dz2[y] -= 1.0;
        dz2 *= scale;
        grads.W2.noalias() += dz2 * c.a1.transpose();
        grads.b2.col(0) += dz2;
        const Eigen::VectorXd da1 = (p.W2.transpose() * dz2).cwiseProduct(c.drop);
        const Eigen::VectorXd dz1 = (c.z1.array() > 0.0).select(da1, 0.0);
        grads.W1.noalias() += dz1 * batch[i]->transpose();
        grads.b1.col(0) += dz1;
        if (input_grads) (*input_grads)[i] = p.W1.transpose() * dz1;
    }
    const auto names = grads.block_names();
    const auto blocks = grads.blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b)
        if (!blocks[b]->allFinite()) throw NumericError(fmt::format("non-finite gradient in block {}", names[b]));
    if (!std::isfinite(loss)) throw NumericError("non-finite head loss");
    return loss;
}

HeadModel fit_head(std::span<const Eigen::VectorXd> train, std::span<const int> train_labels,
                   std::span<const Eigen::VectorXd> dev, std::span<const int> dev_labels, const HeadConfig& arch,
                   const HeadTrainConfig& config, HeadFitLog* log) {
    if (train.empty() || train.size() != train_labels.size()) throw ConfigError("head: training set empty or label mismatch");
    if (dev.size() != dev_labels.size()) throw ConfigError("head: dev label count mismatch");
    HeadFitLog local;
    HeadFitLog& lg = log ? *log : local;
    lg = HeadFitLog{};
    lg.used_dev = !dev.empty();
    if (!lg.used_dev) warn("head: empty dev set, training for a fixed {} epochs", config.max_epochs);

    HeadModel model = init_head(static_cast<int>(train.front().size()), arch, config.seed);
    HeadModel best = model;
    Adam<HeadParams> adam(model.params, config.adam);
    early_stopping_loop(
        train.size(), dev.size(), dev_labels, config, lg,
        [&](std::span<const std::size_t> idx, Rng& rng) {
            std::vector<const Eigen::VectorXd*> batch;
            std::vector<int> labels;
            for (auto i : idx) {
                batch.push_back(&train[i]);
                labels.push_back(train_labels[i]);
            }
            HeadParams grads = model.params.zeros_like();
            const double loss = head_gradients(model, batch, labels, grads, &rng);
            adam.step(model.params, grads);
            return loss;
        },
        [&] {
            std::vector<int> pred;
            for (const auto& x : dev) pred.push_back(argmax2(head_forward(model, x)));
            return pred;
        },
        [&] { best = model; }, [&] { model = best; });
    return model;
}

HeadModel fit_head_finetune(TransformerEncoder& encoder, std::span<const EncoderInput> train,
                            std::span<const int> train_labels, std::span<const EncoderInput> dev,
                            std::span<const int> dev_labels, Pooling pooling, const HeadConfig& arch,
                            const HeadTrainConfig& config, HeadFitLog* log) {
    if (train.empty() || train.size() != train_labels.size()) throw ConfigError("head: training set empty or label mismatch");
    if (dev.size() != dev_labels.size()) throw ConfigError("head: dev label count mismatch");
    HeadFitLog local;
    HeadFitLog& lg = log ? *log : local;
    lg = HeadFitLog{};
    lg.used_dev = !dev.empty();
    if (!lg.used_dev) warn("fine-tune: empty dev set, training for a fixed {} epochs", config.max_epochs);

    HeadModel model = init_head(encoder.hidden_size(), arch, config.seed);
    HeadModel best = model;
    TransformerWeights best_weights = encoder.weights();
    Adam<HeadParams> head_adam(model.params, config.adam);
    Adam<TransformerWeights> enc_adam(encoder.weights(), config.adam);

    early_stopping_loop(
        train.size(), dev.size(), dev_labels, config, lg,
        [&](std::span<const std::size_t> idx, Rng& rng) {
            std::vector<TransformerCache> caches(idx.size());
            std::vector<Eigen::VectorXd> pooled(idx.size());
            std::vector<const Eigen::VectorXd*> batch;
            std::vector<int> labels;
            for (std::size_t k = 0; k < idx.size(); ++k) {
                const auto& in = train[idx[k]];
                pooled[k] = pool_hidden(encoder.forward(in, &caches[k]), in.mask, pooling);
                batch.push_back(&pooled[k]);
                labels.push_back(train_labels[idx[k]]);
            }
            HeadParams grads = model.params.zeros_like();
            std::vector<Eigen::VectorXd> dpooled;
            const double loss = head_gradients(model, batch, labels, grads, &rng, &dpooled);
            TransformerWeights enc_grads = encoder.weights().zeros_like();
            for (std::size_t k = 0; k < idx.size(); ++k) {
                const auto& mask = train[idx[k]].mask;
                Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(mask.size()), encoder.hidden_size());
                if (pooling == Pooling::first) {
                    dh.row(0) = dpooled[k].transpose();
                } else {
                    const double n = static_cast<double>(std::count(mask.begin(), mask.end(), 1));
                    for (std::size_t t = 0; t < mask.size(); ++t)
                        if (mask[t]) dh.row(static_cast<Eigen::Index>(t)) = dpooled[k].transpose() / n;
                }
                encoder.backward(caches[k], dh, enc_grads);
            }
            for (auto& [name, b] : enc_grads.named_blocks())
                if (!b->allFinite()) throw NumericError(fmt::format("non-finite gradient in block {}", name));
            head_adam.step(model.params, grads);
            enc_adam.step(encoder.mutable_weights(), enc_grads);
            return loss;
        },
        [&] {
            std::vector<int> pred;
            for (const auto& in : dev) pred.push_back(argmax2(head_forward(model, encode_pool(in, encoder, pooling))));
            return pred;
        },
        [&] {
            best = model;
            best_weights = encoder.weights();
        },
        [&] {
            model = best;
            encoder.mutable_weights() = best_weights;
        });
    return model;
}

} // namespace mbti
