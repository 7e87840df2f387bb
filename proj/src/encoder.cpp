#include "mbti/encoder.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "mbti/error.hpp"
#include "mbti/log.hpp"
#include "mbti/random.hpp"
#include "mbti/tensor_archive.hpp"
#include "mbti/unicode.hpp"

namespace mbti {

std::string_view pooling_name(Pooling p) { return p == Pooling::first ? "first" : "mean"; }

Pooling parse_pooling(std::string_view name) {
    if (name == "first") return Pooling::first;
    if (name == "mean") return Pooling::mean;
    throw ConfigError(fmt::format("unknown pooling '{}' (expected first or mean)", name));
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

EncoderInput make_encoder_input(std::span<const int> subwords, const ContextualEncoder& encoder,
                                std::size_t max_tokens) {
    if (max_tokens < 2) throw ConfigError("encoder max_tokens must be >= 2");
    EncoderInput in;
    in.ids.reserve(max_tokens);
    in.ids.push_back(encoder.cls_id());
    const std::size_t body = std::min(subwords.size(), max_tokens - 2);
    in.ids.insert(in.ids.end(), subwords.begin(), subwords.begin() + static_cast<std::ptrdiff_t>(body));
    in.ids.push_back(encoder.sep_id());
    in.mask.assign(in.ids.size(), 1);
    in.ids.resize(max_tokens, encoder.pad_id());
    in.mask.resize(max_tokens, 0);
    return in;
}

EncoderInput tokenize_truncate(std::string_view text, const ContextualEncoder& encoder, std::size_t max_tokens) {
    const auto sub = encoder.tokenize(text);
    return make_encoder_input(sub, encoder, max_tokens);
}

Eigen::VectorXd pool_hidden(const Eigen::MatrixXd& hidden, const std::vector<std::uint8_t>& mask, Pooling pooling) {
    if (pooling == Pooling::first) return hidden.row(0).transpose();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(hidden.cols());
    double n = 0.0;
    for (Eigen::Index t = 0; t < hidden.rows(); ++t) {
        if (!mask[static_cast<std::size_t>(t)]) continue;
        sum += hidden.row(t).transpose();
        n += 1.0;
    }
    return n > 0.0 ? Eigen::VectorXd(sum / n) : sum;
}

Eigen::VectorXd encode_pool(const EncoderInput& input, const ContextualEncoder& encoder, Pooling pooling) {
    return pool_hidden(encoder.encode(input), input.mask, pooling);
}

Eigen::VectorXd encode_text(std::string_view text, const ContextualEncoder& encoder, const EncoderConfig& config) {
    const auto sub = encoder.tokenize(text);
    if (!config.chunk_mean || sub.size() + 2 <= config.max_tokens)
        return encode_pool(make_encoder_input(sub, encoder, config.max_tokens), encoder, config.pooling);
    const std::size_t step = config.max_tokens - 2;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(encoder.hidden_size());
    std::size_t chunks = 0;
    for (std::size_t start = 0; start < sub.size(); start += step, ++chunks) {
        const auto n = std::min(step, sub.size() - start);
        sum += encode_pool(make_encoder_input(std::span<const int>(sub).subspan(start, n), encoder, config.max_tokens),
                           encoder, config.pooling);
    }
    return sum / static_cast<double>(chunks);
}

// ---------------------------------------------------------------- stub

StubEncoder::StubEncoder(std::uint64_t seed, int hidden, int vocab_size)
    : seed_(seed), hidden_(hidden), vocab_size_(vocab_size) {
    if (hidden < 1 || vocab_size < 5) throw ConfigError("stub encoder: bad hidden or vocabulary size");
}

std::vector<int> StubEncoder::tokenize(std::string_view text) const {
    std::vector<int> ids;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        const auto h = fnv1a(cur.data(), cur.size());
        ids.push_back(4 + static_cast<int>(h % static_cast<std::uint64_t>(vocab_size_ - 4)));
        cur.clear();
    };
    for (char32_t c : unicode::decode(text)) {
        if (unicode::is_space(c))
            flush();
        else
            unicode::append(cur, c);
    }
    flush();
    return ids;
}

Eigen::VectorXd StubEncoder::state(int token, std::size_t position) const {
    Rng rng(derive_seed(seed_, static_cast<std::uint64_t>(token), position));
    Eigen::VectorXd v(hidden_);
    for (int i = 0; i < hidden_; ++i) v[i] = rng.normal();
    return v / v.norm();
}

Eigen::MatrixXd StubEncoder::encode(const EncoderInput& input) const {
    Eigen::MatrixXd h(static_cast<Eigen::Index>(input.ids.size()), hidden_);
    for (std::size_t p = 0; p < input.ids.size(); ++p) h.row(static_cast<Eigen::Index>(p)) = state(input.ids[p], p);
    return h;
}

std::uint64_t StubEncoder::checksum() const {
    std::uint64_t h = fnv1a(&seed_, sizeof seed_);
    return fnv1a(&hidden_, sizeof hidden_, h);
}

std::unique_ptr<ContextualEncoder> make_stub_encoder(std::uint64_t seed, int hidden) {
    return std::make_unique<StubEncoder>(seed, hidden);
}

// ---------------------------------------------------------------- transformer

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_derivative(double x) {
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::MatrixXd& gain, const Eigen::MatrixXd& bias, double eps,
                           Eigen::MatrixXd* normalized, Eigen::VectorXd* inv_std) {
    const Eigen::Index n = x.cols();
    Eigen::MatrixXd xh(x.rows(), n);
    Eigen::VectorXd inv(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mu = x.row(r).mean();
        const double var = (x.row(r).array() - mu).square().sum() / static_cast<double>(n);
        inv[r] = 1.0 / std::sqrt(var + eps);
        xh.row(r) = (x.row(r).array() - mu) * inv[r];
    }
    Eigen::MatrixXd y = (xh.array().rowwise() * gain.row(0).array()).rowwise() + bias.row(0).array();
    if (normalized) *normalized = std::move(xh);
    if (inv_std) *inv_std = std::move(inv);
    return y;
}

namespace {

Eigen::MatrixXd linear(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd y = x * w.transpose();
    y.rowwise() += b.row(0);
    return y;
}

void linear_backward(const Eigen::MatrixXd& dy, const Eigen::MatrixXd& x, Eigen::MatrixXd& dw, Eigen::MatrixXd& db) {
    dw.noalias() += dy.transpose() * x;
    db += dy.colwise().sum();
}

Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& dy, const Eigen::MatrixXd& xh, const Eigen::VectorXd& inv,
                                    const Eigen::MatrixXd& gain, Eigen::MatrixXd& dgain, Eigen::MatrixXd& dbias) {
    dgain += (dy.array() * xh.array()).colwise().sum().matrix();
    dbias += dy.colwise().sum();
    const Eigen::MatrixXd dxh = dy.array().rowwise() * gain.row(0).array();
    Eigen::MatrixXd dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const double m1 = dxh.row(r).mean();
        const double m2 = (dxh.row(r).array() * xh.row(r).array()).mean();
        dx.row(r) = inv[r] * (dxh.row(r).array() - m1 - xh.row(r).array() * m2);
    }
    return dx;
}

std::string layer_prefix(int i) { return fmt::format("transformer.layer.{}.", i); }

} // namespace

std::vector<std::pair<std::string, Eigen::MatrixXd*>> TransformerWeights::named_blocks() {
    std::vector<std::pair<std::string, Eigen::MatrixXd*>> out{
        {"embeddings.word_embeddings.weight", &word},
        {"embeddings.position_embeddings.weight", &position},
        {"embeddings.LayerNorm.weight", &emb_ln_g},
        {"embeddings.LayerNorm.bias", &emb_ln_b},
    };
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& l = layers[i];
        const auto p = layer_prefix(static_cast<int>(i));
        out.insert(out.end(), {
                                  {p + "attention.q_lin.weight", &l.q_w},
                                  {p + "attention.q_lin.bias", &l.q_b},
                                  {p + "attention.k_lin.weight", &l.k_w},
                                  {p + "attention.k_lin.bias", &l.k_b},
                                  {p + "attention.v_lin.weight", &l.v_w},
                                  {p + "attention.v_lin.bias", &l.v_b},
                                  {p + "attention.out_lin.weight", &l.o_w},
                                  {p + "attention.out_lin.bias", &l.o_b},
                                  {p + "sa_layer_norm.weight", &l.ln1_g},
                                  {p + "sa_layer_norm.bias", &l.ln1_b},
                                  {p + "ffn.lin1.weight", &l.ff1_w},
                                  {p + "ffn.lin1.bias", &l.ff1_b},
                                  {p + "ffn.lin2.weight", &l.ff2_w},
                                  {p + "ffn.lin2.bias", &l.ff2_b},
                                  {p + "output_layer_norm.weight", &l.ln2_g},
                                  {p + "output_layer_norm.bias", &l.ln2_b},
                              });
    }
    return out;
}

std::vector<std::pair<std::string, const Eigen::MatrixXd*>> TransformerWeights::named_blocks() const {
    auto mut = const_cast<TransformerWeights*>(this)->named_blocks();
    std::vector<std::pair<std::string, const Eigen::MatrixXd*>> out;
    out.reserve(mut.size());
    for (auto& [n, p] : mut) out.emplace_back(std::move(n), p);
    return out;
}

std::vector<Eigen::MatrixXd*> TransformerWeights::blocks() {
    std::vector<Eigen::MatrixXd*> out;
    for (auto& [n, p] : named_blocks()) out.push_back(p);
    return out;
}

TransformerWeights TransformerWeights::zeros_like() const {
    TransformerWeights z = *this;
    for (auto* b : z.blocks()) b->setZero();
    return z;
}

namespace {

void shape_weights(TransformerWeights& w, const TransformerConfig& c) {
    w.word.resize(c.vocab_size, c.dim);
    w.position.resize(c.max_position, c.dim);
    w.emb_ln_g.resize(1, c.dim);
    w.emb_ln_b.resize(1, c.dim);
    w.layers.assign(static_cast<std::size_t>(c.n_layers), {});
    for (auto& l : w.layers) {
        for (auto* m : {&l.q_w, &l.k_w, &l.v_w, &l.o_w}) m->resize(c.dim, c.dim);
        for (auto* m : {&l.q_b, &l.k_b, &l.v_b, &l.o_b, &l.ln1_g, &l.ln1_b, &l.ff2_b, &l.ln2_g, &l.ln2_b})
            m->resize(1, c.dim);
        l.ff1_w.resize(c.hidden_dim, c.dim);
        l.ff1_b.resize(1, c.hidden_dim);
        l.ff2_w.resize(c.dim, c.hidden_dim);
    }
}

bool is_norm_gain(const std::string& name) {
    return name.ends_with("LayerNorm.weight") || name.ends_with("layer_norm.weight");
}

} // namespace

TransformerWeights random_transformer_weights(const TransformerConfig& config, std::uint64_t seed) {
    TransformerWeights w;
    shape_weights(w, config);
    Rng rng(derive_seed(seed, 0x7F));
    for (auto& [name, m] : w.named_blocks()) {
        const bool gain = is_norm_gain(name);
        for (Eigen::Index j = 0; j < m->cols(); ++j)
            for (Eigen::Index i = 0; i < m->rows(); ++i)
                (*m)(i, j) = gain ? 1.0 + 0.1 * rng.normal() : 0.02 * rng.normal();
    }
    return w;
}

TransformerEncoder::TransformerEncoder(TransformerConfig config, TransformerWeights weights, WordPiece tokenizer)
    : config_(config), weights_(std::move(weights)), tokenizer_(std::move(tokenizer)) {
    if (config_.dim % config_.n_heads != 0) throw ConfigError("encoder dim must be divisible by n_heads");
    if (static_cast<int>(tokenizer_.size()) > config_.vocab_size)
        throw DataError(fmt::format("vocabulary has {} entries but the embedding table only {}", tokenizer_.size(),
                                    config_.vocab_size));
}

std::unique_ptr<TransformerEncoder> TransformerEncoder::load(const std::filesystem::path& weights_path,
                                                             const std::filesystem::path& vocab_path,
                                                             const std::filesystem::path& config_path) {
    const TensorArchive ar = read_tensor_archive(weights_path);
    std::string prefix;
    if (!ar.contains("embeddings.word_embeddings.weight") && ar.contains("distilbert.embeddings.word_embeddings.weight"))
        prefix = "distilbert.";
    auto shape_of = [&](const std::string& name) -> const std::vector<std::int64_t>& {
        auto it = ar.tensors.find(prefix + name);
        if (it == ar.tensors.end()) throw DataError(fmt::format("tensor '{}' missing from weight archive", prefix + name));
        return it->second.shape;
    };

    TransformerConfig c;
    std::filesystem::path cfg_path = config_path.empty() ? weights_path.parent_path() / "config.json" : config_path;
    const auto& word_shape = shape_of("embeddings.word_embeddings.weight");
    if (word_shape.size() != 2) throw DataError("word embedding tensor must be 2-D");
    c.vocab_size = static_cast<int>(word_shape[0]);
    c.dim = static_cast<int>(word_shape[1]);
    c.max_position = static_cast<int>(shape_of("embeddings.position_embeddings.weight").at(0));
    if (std::filesystem::exists(cfg_path)) {
        std::ifstream in(cfg_path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw DataError(fmt::format("encoder config {}: {}", cfg_path.string(), e.what()));
        }
        c.vocab_size = j.value("vocab_size", c.vocab_size);
        c.dim = j.value("dim", c.dim);
        c.n_layers = j.value("n_layers", c.n_layers);
        c.n_heads = j.value("n_heads", c.n_heads);
        c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
        c.max_position = j.value("max_position_embeddings", c.max_position);
    } else {
        int layers = 0;
        while (ar.contains(prefix + layer_prefix(layers) + "attention.q_lin.weight")) ++layers;
        c.n_layers = layers;
        c.hidden_dim = layers > 0 ? static_cast<int>(shape_of(layer_prefix(0) + "ffn.lin1.weight").at(0)) : c.hidden_dim;
        c.n_heads = std::max(1, c.dim / 64);
        warn("encoder config {} not found; inferred {} layers, {} heads", cfg_path.string(), c.n_layers, c.n_heads);
    }

    TransformerWeights w;
    shape_weights(w, c);
    for (auto& [name, m] : w.named_blocks()) {
        const Tensor& t = ar.get(prefix + name, m->rows() == 1 ? std::vector<std::int64_t>{m->cols()}
                                                               : std::vector<std::int64_t>{m->rows(), m->cols()});
        // archive is row-major
        for (Eigen::Index i = 0; i < m->rows(); ++i)
            for (Eigen::Index j = 0; j < m->cols(); ++j)
                (*m)(i, j) = t.data[static_cast<std::size_t>(i * m->cols() + j)];
    }
    return std::make_unique<TransformerEncoder>(c, std::move(w), WordPiece::load(vocab_path));
}

std::uint64_t TransformerEncoder::checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, m] : weights_.named_blocks()) {
        h = fnv1a(name.data(), name.size(), h);
        h = fnv1a(m->data(), static_cast<std::size_t>(m->size()) * sizeof(double), h);
    }
    return h;
}

Eigen::MatrixXd TransformerEncoder::forward(const EncoderInput& input, TransformerCache* cache) const {
    const auto L = static_cast<Eigen::Index>(input.ids.size());
    if (L == 0 || input.mask.size() != input.ids.size()) throw ConfigError("encoder input empty or mask mismatch");
    if (L > config_.max_position)
        throw ConfigError(fmt::format("sequence of {} tokens exceeds {} positions", L, config_.max_position));
    const auto& W = weights_;
    Eigen::MatrixXd x(L, config_.dim);
    for (Eigen::Index t = 0; t < L; ++t) {
        const int id = input.ids[static_cast<std::size_t>(t)];
        if (id < 0 || id >= config_.vocab_size) throw ConfigError(fmt::format("token id {} out of range", id));
        x.row(t) = W.word.row(id) + W.position.row(t);
    }
    const double eps = config_.layer_norm_eps;
    if (cache) {
        cache->ids = input.ids;
        cache->mask = input.mask;
        cache->layers.assign(W.layers.size(), {});
    }
    x = layer_norm(x, W.emb_ln_g, W.emb_ln_b, eps, cache ? &cache->emb_norm : nullptr,
                   cache ? &cache->emb_inv : nullptr);

    const int H = config_.n_heads;
    const int dh = config_.dim / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t li = 0; li < W.layers.size(); ++li) {
        const auto& l = W.layers[li];
        TransformerCache::Layer* lc = cache ? &cache->layers[li] : nullptr;
        const Eigen::MatrixXd q = linear(x, l.q_w, l.q_b);
        const Eigen::MatrixXd k = linear(x, l.k_w, l.k_b);
        const Eigen::MatrixXd v = linear(x, l.v_w, l.v_b);
        Eigen::MatrixXd ctx(L, config_.dim);
        if (lc) lc->probs.resize(static_cast<std::size_t>(H));
        for (int h = 0; h < H; ++h) {
            Eigen::MatrixXd s = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() * scale;
            for (Eigen::Index r = 0; r < L; ++r) {
                double mx = -std::numeric_limits<double>::infinity();
                for (Eigen::Index c = 0; c < L; ++c)
                    if (input.mask[static_cast<std::size_t>(c)]) mx = std::max(mx, s(r, c));
                double z = 0.0;
                for (Eigen::Index c = 0; c < L; ++c) {
                    s(r, c) = input.mask[static_cast<std::size_t>(c)] ? std::exp(s(r, c) - mx) : 0.0;
                    z += s(r, c);
                }
                if (z > 0.0) s.row(r) /= z;
            }
            ctx.middleCols(h * dh, dh) = s * v.middleCols(h * dh, dh);
            if (lc) lc->probs[static_cast<std::size_t>(h)] = std::move(s);
        }
        const Eigen::MatrixXd attn = linear(ctx, l.o_w, l.o_b);
        Eigen::MatrixXd s = layer_norm(attn + x, l.ln1_g, l.ln1_b, eps, lc ? &lc->norm1 : nullptr, lc ? &lc->inv1 : nullptr);
        const Eigen::MatrixXd f1 = linear(s, l.ff1_w, l.ff1_b);
        const Eigen::MatrixXd g = f1.unaryExpr([](double a) { return gelu(a); });
        const Eigen::MatrixXd f2 = linear(g, l.ff2_w, l.ff2_b);
        Eigen::MatrixXd out = layer_norm(f2 + s, l.ln2_g, l.ln2_b, eps, lc ? &lc->norm2 : nullptr, lc ? &lc->inv2 : nullptr);
        if (lc) {
            lc->input = x;
            lc->q = q;
            lc->k = k;
            lc->v = v;
            lc->ctx = ctx;
            lc->s = s;
            lc->f1 = f1;
        }
        x = std::move(out);
    }
    return x;
}

void TransformerEncoder::backward(const TransformerCache& cache, const Eigen::MatrixXd& d_hidden,
                                  TransformerWeights& grads) const {
    const auto& W = weights_;
    const int H = config_.n_heads;
    const int dh = config_.dim / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Eigen::MatrixXd dx = d_hidden;
    for (std::size_t li = W.layers.size(); li-- > 0;) {
        const auto& l = W.layers[li];
        auto& g = grads.layers[li];
        const auto& c = cache.layers[li];

        const Eigen::MatrixXd dpre2 = layer_norm_backward(dx, c.norm2, c.inv2, l.ln2_g, g.ln2_g, g.ln2_b);
        const Eigen::MatrixXd act = c.f1.unaryExpr([](double a) { return gelu(a); });
        linear_backward(dpre2, act, g.ff2_w, g.ff2_b);
        const Eigen::MatrixXd dact = dpre2 * l.ff2_w;
        const Eigen::MatrixXd df1 = dact.cwiseProduct(c.f1.unaryExpr([](double a) { return gelu_derivative(a); }));
        linear_backward(df1, c.s, g.ff1_w, g.ff1_b);
        const Eigen::MatrixXd ds = dpre2 + df1 * l.ff1_w;

        const Eigen::MatrixXd dpre1 = layer_norm_backward(ds, c.norm1, c.inv1, l.ln1_g, g.ln1_g, g.ln1_b);
        linear_backward(dpre1, c.ctx, g.o_w, g.o_b);
        const Eigen::MatrixXd dctx = dpre1 * l.o_w;

        Eigen::MatrixXd dq(dctx.rows(), dctx.cols()), dk(dctx.rows(), dctx.cols()), dv(dctx.rows(), dctx.cols());
        for (int h = 0; h < H; ++h) {
            const auto& P = c.probs[static_cast<std::size_t>(h)];
            const Eigen::MatrixXd dctx_h = dctx.middleCols(h * dh, dh);
            const Eigen::MatrixXd dP = dctx_h * c.v.middleCols(h * dh, dh).transpose();
            dv.middleCols(h * dh, dh) = P.transpose() * dctx_h;
            const Eigen::VectorXd row_dot = (P.array() * dP.array()).rowwise().sum();
            const Eigen::MatrixXd dS = (P.array() * (dP.colwise() - row_dot).array()).matrix() * scale;
            dq.middleCols(h * dh, dh) = dS * c.k.middleCols(h * dh, dh);
            dk.middleCols(h * dh, dh) = dS.transpose() * c.q.middleCols(h * dh, dh);
        }
        linear_backward(dq, c.input, g.q_w, g.q_b);
        linear_backward(dk, c.input, g.k_w, g.k_b);
        linear_backward(dv, c.input, g.v_w, g.v_b);
        dx = dpre1 + dq * l.q_w + dk * l.k_w + dv * l.v_w;
    }
    const Eigen::MatrixXd demb =
        layer_norm_backward(dx, cache.emb_norm, cache.emb_inv, W.emb_ln_g, grads.emb_ln_g, grads.emb_ln_b);
    for (Eigen::Index t = 0; t < demb.rows(); ++t) {
        grads.word.row(cache.ids[static_cast<std::size_t>(t)]) += demb.row(t);
        grads.position.row(t) += demb.row(t);
    }
}

std::unique_ptr<ContextualEncoder> load_encoder(const EncoderConfig& config, std::uint64_t seed) {
    const std::string& w = config.weights_path;
    if (w == "stub") return make_stub_encoder(seed);
    if (w.starts_with("stub:")) {
        try {
            return make_stub_encoder(std::stoull(w.substr(5)));
        } catch (const std::exception&) {
            throw ConfigError(fmt::format("bad stub encoder spec '{}'", w));
        }
    }
    if (w.empty()) throw ConfigError("encoder.weights is required for the encoder model (or use 'stub')");
    if (config.vocab_path.empty()) throw ConfigError("encoder.vocab is required with real encoder weights");
    return TransformerEncoder::load(w, config.vocab_path, config.config_path);
}

} // namespace mbti
