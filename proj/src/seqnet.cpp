#include "mbti/seqnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "mbti/error.hpp"
#include "mbti/log.hpp"
#include "mbti/metrics.hpp"
#include "mbti/random.hpp"

namespace mbti {

std::vector<Eigen::MatrixXd*> SeqNetParams::blocks() {
    std::vector<Eigen::MatrixXd*> out;
    for (auto& l : lstm) {
        out.push_back(&l.W);
        out.push_back(&l.U);
        out.push_back(&l.b);
    }
    out.insert(out.end(), {&attention.W, &attention.b, &attention.v, &hidden.W, &hidden.b,
                           &output.W, &output.b});
    return out;
}

std::vector<const Eigen::MatrixXd*> SeqNetParams::blocks() const {
    auto mut = const_cast<SeqNetParams*>(this)->blocks();
    return {mut.begin(), mut.end()};
}

std::vector<std::string> SeqNetParams::block_names() const {
    std::vector<std::string> out;
    for (std::size_t l = 0; l < lstm.size(); ++l)
        for (const char* n : {"W", "U", "b"}) out.push_back(fmt::format("lstm{}.{}", l, n));
    for (const char* n : {"attention.W", "attention.b", "attention.v", "dense.W", "dense.b",
                          "output.W", "output.b"})
        out.emplace_back(n);
    return out;
}

SeqNetParams SeqNetParams::zeros_like() const {
    SeqNetParams z = *this;
    for (auto* b : z.blocks()) b->setZero();
    return z;
}

namespace {

void glorot(Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    m.resize(rows, cols);
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-limit, limit);
}

inline double sigm(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

struct LstmCache {
    Eigen::MatrixXd X; // T x in
    Eigen::MatrixXd I, F, G, O, C, TC, H; // H x T
};

void lstm_forward(const LstmParams& p, const Eigen::MatrixXd& X, LstmCache& cache) {
    const Eigen::Index T = X.rows();
    const Eigen::Index H = p.U.cols();
    cache.X = X;
    Eigen::MatrixXd Z = p.W * X.transpose();
    Z.colwise() += p.b.col(0);
    for (auto* m : {&cache.I, &cache.F, &cache.G, &cache.O, &cache.C, &cache.TC, &cache.H}) m->resize(H, T);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(H);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(H);
    for (Eigen::Index t = 0; t < T; ++t) {
        Eigen::VectorXd z = Z.col(t) + p.U * h;
        for (Eigen::Index k = 0; k < H; ++k) {
            const double i = sigm(z[k]);
            const double f = sigm(z[H + k]);
            const double g = std::tanh(z[2 * H + k]);
            const double o = sigm(z[3 * H + k]);
            c[k] = f * c[k] + i * g;
            const double tc = std::tanh(c[k]);
            h[k] = o * tc;
            cache.I(k, t) = i;
            cache.F(k, t) = f;
            cache.G(k, t) = g;
            cache.O(k, t) = o;
            cache.C(k, t) = c[k];
            cache.TC(k, t) = tc;
        }
        cache.H.col(t) = h;
    }
}

// dH: H x T upstream gradient on hidden states; returns dX (in x T).
Eigen::MatrixXd lstm_backward(const LstmParams& p, const LstmCache& cache, const Eigen::MatrixXd& dH,
                              LstmParams& g) {
    const Eigen::Index T = cache.X.rows();
    const Eigen::Index H = p.U.cols();
    Eigen::MatrixXd dZ(4 * H, T);
    Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(H);
    Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(H);
    for (Eigen::Index t = T - 1; t >= 0; --t) {
        const Eigen::VectorXd dh = dH.col(t) + dh_next;
        for (Eigen::Index k = 0; k < H; ++k) {
            const double i = cache.I(k, t), f = cache.F(k, t), gg = cache.G(k, t), o = cache.O(k, t);
            const double tc = cache.TC(k, t);
            const double c_prev = t > 0 ? cache.C(k, t - 1) : 0.0;
            const double dc = dc_next[k] + dh[k] * o * (1.0 - tc * tc);
            dZ(k, t) = dc * gg * i * (1.0 - i);
            dZ(H + k, t) = dc * c_prev * f * (1.0 - f);
            dZ(2 * H + k, t) = dc * i * (1.0 - gg * gg);
            dZ(3 * H + k, t) = dh[k] * tc * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        dh_next = p.U.transpose() * dZ.col(t);
    }
    g.W.noalias() += dZ * cache.X;
    if (T > 1) g.U.noalias() += dZ.rightCols(T - 1) * cache.H.leftCols(T - 1).transpose();
    g.b.col(0) += dZ.rowwise().sum();
    return p.W.transpose() * dZ;
}

struct AttentionCache {
    Eigen::MatrixXd S; // D x T, attended states
    Eigen::MatrixXd E; // A x T, tanh activations
    Eigen::VectorXd alpha;
};

void attention_forward(const AttentionParams& p, const Eigen::MatrixXd& S, const std::vector<std::uint8_t>& mask,
                       AttentionCache& cache) {
    const Eigen::Index T = S.cols();
    cache.S = S;
    Eigen::MatrixXd pre = p.W * S;
    pre.colwise() += p.b.col(0);
    cache.E = pre.array().tanh().matrix();
    const Eigen::VectorXd scores = (p.v.transpose() * cache.E).transpose();
    cache.alpha = Eigen::VectorXd::Zero(T);
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < T; ++t)
        if (mask[static_cast<std::size_t>(t)]) mx = std::max(mx, scores[t]);
    double z = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
        if (!mask[static_cast<std::size_t>(t)]) continue;
        cache.alpha[t] = std::exp(scores[t] - mx);
        z += cache.alpha[t];
    }
    if (z > 0.0) cache.alpha /= z;
}

// Accumulates parameter gradients; returns dS (D x T).
Eigen::MatrixXd attention_backward(const AttentionParams& p, const AttentionCache& cache,
                                   const std::vector<std::uint8_t>& mask, const Eigen::VectorXd& dalpha,
                                   AttentionParams& g) {
    const Eigen::Index T = cache.S.cols();
    const double avg = cache.alpha.dot(dalpha);
    Eigen::VectorXd ds = Eigen::VectorXd::Zero(T);
    for (Eigen::Index t = 0; t < T; ++t)
        if (mask[static_cast<std::size_t>(t)]) ds[t] = cache.alpha[t] * (dalpha[t] - avg);
    g.v.col(0) += cache.E * ds;
    const Eigen::MatrixXd dpre =
        ((p.v.col(0) * ds.transpose()).array() * (1.0 - cache.E.array().square())).matrix();
    g.W.noalias() += dpre * cache.S.transpose();
    g.b.col(0) += dpre.rowwise().sum();
    return p.W.transpose() * dpre;
}

struct NetCache {
    Eigen::Index T = 0;
    int n_real = 0;
    Eigen::Index last_real = -1;
    std::vector<std::uint8_t> mask;
    Eigen::MatrixXd X0; // T x in
    std::vector<LstmCache> layers;
    AttentionCache attn;
    Eigen::VectorXd pooled, drop_mask, pooled_d, z1, a1, probs;
};

SeqForward forward_impl(const SeqNetModel& model, const EmbeddedSequence& input, Rng* rng, NetCache& cache) {
    const auto& cfg = model.config;
    const auto& p = model.params;
    if (input.x.cols() != cfg.input_dim)
        throw ConfigError(fmt::format("sequence width {} does not match model input {}", input.x.cols(), cfg.input_dim));
    cache.last_real = -1;
    cache.n_real = 0;
    for (std::size_t t = 0; t < input.mask.size(); ++t) {
        if (input.mask[t]) {
            cache.last_real = static_cast<Eigen::Index>(t);
            ++cache.n_real;
        }
    }
    cache.T = cache.last_real + 1;
    cache.mask.assign(input.mask.begin(), input.mask.begin() + cache.T);
    cache.layers.assign(static_cast<std::size_t>(cfg.layers), {});
    const Eigen::Index H = cfg.hidden;

    SeqForward out;
    out.attention.assign(input.mask.size(), 0.0);
    cache.pooled = Eigen::VectorXd::Zero(H);
    if (cache.T > 0) {
        cache.X0 = input.x.topRows(cache.T);
        if (!cfg.attention_first) {
            Eigen::MatrixXd X = cache.X0;
            for (int l = 0; l < cfg.layers; ++l) {
                lstm_forward(p.lstm[static_cast<std::size_t>(l)], X, cache.layers[static_cast<std::size_t>(l)]);
                X = cache.layers[static_cast<std::size_t>(l)].H.transpose();
            }
            const auto& top = cache.layers.back().H;
            attention_forward(p.attention, top, cache.mask, cache.attn);
            cache.pooled = top * cache.attn.alpha;
        } else {
            attention_forward(p.attention, cache.X0.transpose(), cache.mask, cache.attn);
            Eigen::MatrixXd X = (cache.attn.alpha * static_cast<double>(cache.n_real)).asDiagonal() * cache.X0;
            for (int l = 0; l < cfg.layers; ++l) {
                lstm_forward(p.lstm[static_cast<std::size_t>(l)], X, cache.layers[static_cast<std::size_t>(l)]);
                X = cache.layers[static_cast<std::size_t>(l)].H.transpose();
            }
            cache.pooled = cache.layers.back().H.col(cache.last_real);
        }
        for (Eigen::Index t = 0; t < cache.T; ++t) out.attention[static_cast<std::size_t>(t)] = cache.attn.alpha[t];
    }

    cache.drop_mask = Eigen::VectorXd::Ones(H);
    if (rng && cfg.dropout > 0.0) {
        const double keep = 1.0 - cfg.dropout;
        for (Eigen::Index k = 0; k < H; ++k) cache.drop_mask[k] = rng->uniform() < keep ? 1.0 / keep : 0.0;
    }
    cache.pooled_d = cache.pooled.cwiseProduct(cache.drop_mask);
    cache.z1 = p.hidden.W * cache.pooled_d + p.hidden.b.col(0);
    cache.a1 = cache.z1.cwiseMax(0.0);
    const Eigen::VectorXd z2 = p.output.W * cache.a1 + p.output.b.col(0);
    const double mx = z2.maxCoeff();
    const double e0 = std::exp(z2[0] - mx), e1 = std::exp(z2[1] - mx);
    cache.probs.resize(2);
    cache.probs << e0 / (e0 + e1), e1 / (e0 + e1);
    out.probs = {cache.probs[0], cache.probs[1]};
    return out;
}

void backward_impl(const SeqNetModel& model, const NetCache& cache, int label, double scale, SeqNetParams& g) {
    const auto& cfg = model.config;
    const auto& p = model.params;
    Eigen::VectorXd dz2 = cache.probs;
    dz2[label] -= 1.0;
    dz2 *= scale;
    g.output.W.noalias() += dz2 * cache.a1.transpose();
    g.output.b.col(0) += dz2;
    const Eigen::VectorXd da1 = p.output.W.transpose() * dz2;
    const Eigen::VectorXd dz1 = (cache.z1.array() > 0.0).select(da1, 0.0);
    g.hidden.W.noalias() += dz1 * cache.pooled_d.transpose();
    g.hidden.b.col(0) += dz1;
    const Eigen::VectorXd dpooled = (p.hidden.W.transpose() * dz1).cwiseProduct(cache.drop_mask);
    if (cache.T == 0) return;

    const auto L = static_cast<std::size_t>(cfg.layers);
    Eigen::MatrixXd dH;
    if (!cfg.attention_first) {
        const auto& top = cache.layers.back().H;
        dH = dpooled * cache.attn.alpha.transpose();
        const Eigen::VectorXd dalpha = top.transpose() * dpooled;
        dH += attention_backward(p.attention, cache.attn, cache.mask, dalpha, g.attention);
        for (std::size_t l = L; l-- > 0;) dH = lstm_backward(p.lstm[l], cache.layers[l], dH, g.lstm[l]);
    } else {
        dH = Eigen::MatrixXd::Zero(cfg.hidden, cache.T);
        dH.col(cache.last_real) = dpooled;
        for (std::size_t l = L; l-- > 0;) dH = lstm_backward(p.lstm[l], cache.layers[l], dH, g.lstm[l]);
        // dH now holds d(loss)/d(scaled input), in x T
        Eigen::VectorXd dalpha(cache.T);
        for (Eigen::Index t = 0; t < cache.T; ++t)
            dalpha[t] = static_cast<double>(cache.n_real) * cache.X0.row(t).dot(dH.col(t));
        attention_backward(p.attention, cache.attn, cache.mask, dalpha, g.attention);
    }
}

} // namespace

SeqNetModel init_seqnet(const SeqNetConfig& cfg, std::uint64_t seed) {
    if (cfg.input_dim < 1 || cfg.hidden < 1 || cfg.layers < 1 || cfg.attention < 1 || cfg.dense < 1)
        throw ConfigError("seqnet: layer sizes must be >= 1");
    if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw ConfigError("seqnet: dropout must be in [0, 1)");
    SeqNetModel m;
    m.config = cfg;
    Rng rng(derive_seed(seed, 0x5E0));
    const Eigen::Index H = cfg.hidden;
    Eigen::Index in = cfg.input_dim;
    for (int l = 0; l < cfg.layers; ++l) {
        LstmParams lp;
        glorot(lp.W, 4 * H, in, rng);
        glorot(lp.U, 4 * H, H, rng);
        lp.b = Eigen::MatrixXd::Zero(4 * H, 1);
        lp.b.block(H, 0, H, 1).setOnes();
        m.params.lstm.push_back(std::move(lp));
        in = H;
    }
    const Eigen::Index attended = cfg.attention_first ? cfg.input_dim : H;
    glorot(m.params.attention.W, cfg.attention, attended, rng);
    m.params.attention.b = Eigen::MatrixXd::Zero(cfg.attention, 1);
    glorot(m.params.attention.v, cfg.attention, 1, rng);
    glorot(m.params.hidden.W, cfg.dense, H, rng);
    m.params.hidden.b = Eigen::MatrixXd::Zero(cfg.dense, 1);
    glorot(m.params.output.W, 2, cfg.dense, rng);
    m.params.output.b = Eigen::MatrixXd::Zero(2, 1);
    return m;
}

SeqForward seqnet_forward(const SeqNetModel& model, const EmbeddedSequence& input, Rng* dropout_rng) {
    NetCache cache;
    return forward_impl(model, input, dropout_rng, cache);
}

double seqnet_gradients(const SeqNetModel& model, std::span<const EmbeddedSequence* const> batch,
                        std::span<const int> labels, SeqNetParams& grads, Rng* dropout_rng) {
    if (batch.size() != labels.size() || batch.empty())
        throw ConfigError("seqnet: batch and label counts differ or batch is empty");
    const double scale = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    NetCache cache;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        forward_impl(model, *batch[i], dropout_rng, cache);
        const int y = labels[i] ? 1 : 0;
        loss -= std::log(std::max(cache.probs[y], 1e-300)) * scale;
        backward_impl(model, cache, y, scale, grads);
    }
    const auto names = grads.block_names();
    const auto blocks = grads.blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b)
        if (!blocks[b]->allFinite()) throw NumericError(fmt::format("non-finite gradient in block {}", names[b]));
    if (!std::isfinite(loss)) throw NumericError("non-finite seqnet loss");
    return loss;
}

SeqNetModel fit_seqnet(std::span<const EmbeddedSequence> train, std::span<const int> train_labels,
                       std::span<const EmbeddedSequence> dev, std::span<const int> dev_labels,
                       const SeqNetConfig& arch, const SeqTrainConfig& config, SeqFitLog* log) {
    if (train.empty() || train.size() != train_labels.size())
        throw ConfigError("seqnet: training set empty or label count mismatch");
    if (dev.size() != dev_labels.size()) throw ConfigError("seqnet: dev label count mismatch");
    SeqFitLog local;
    SeqFitLog& lg = log ? *log : local;
    lg = SeqFitLog{};
    lg.used_dev = !dev.empty();
    if (!lg.used_dev) warn("seqnet: empty dev set, training for a fixed {} epochs", config.max_epochs);

    SeqNetModel model = init_seqnet(arch, config.seed);
    Adam<SeqNetParams> adam(model.params, config.adam);
    SeqNetModel best = model;
    double best_f1 = -1.0;
    int since_best = 0;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto bs = static_cast<std::size_t>(std::max(config.batch_size, 1));

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        Rng rng(derive_seed(config.seed, 0xE90C, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order.begin(), order.end());
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const auto stop = std::min(order.size(), start + bs);
            std::vector<const EmbeddedSequence*> batch;
            std::vector<int> labels;
            for (std::size_t k = start; k < stop; ++k) {
                batch.push_back(&train[order[k]]);
                labels.push_back(train_labels[order[k]]);
            }
            SeqNetParams grads = model.params.zeros_like();
            try {
                epoch_loss += seqnet_gradients(model, batch, labels, grads, &rng) * static_cast<double>(batch.size());
            } catch (const NumericError& e) {
                throw NumericError(fmt::format("epoch {} batch {}: {}", epoch, start / bs, e.what()));
            }
            adam.step(model.params, grads);
        }
        lg.epoch_loss.push_back(epoch_loss / static_cast<double>(train.size()));
        lg.epochs_run = epoch + 1;
        if (dev.empty()) continue;

        std::vector<int> pred;
        pred.reserve(dev.size());
        for (const auto& s : dev) {
            const auto f = seqnet_forward(model, s);
            pred.push_back(f.probs[1] > f.probs[0] ? 1 : 0);
        }
        const double f1 = macro_f1(dev_labels, pred);
        if (f1 > best_f1) {
            best_f1 = f1;
            best = model;
            lg.best_epoch = epoch + 1;
            lg.best_dev_f1 = f1;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    if (dev.empty()) {
        lg.best_epoch = lg.epochs_run;
        return model;
    }
    return best;
}

} // namespace mbti
