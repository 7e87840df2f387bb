#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mbti/wordpiece.hpp"

namespace mbti {

enum class Pooling { first, mean };

std::string_view pooling_name(Pooling p);
Pooling parse_pooling(std::string_view name);

struct EncoderConfig {
    std::size_t max_tokens = 32;
    Pooling pooling = Pooling::first;
    bool frozen = true;
    /// Average pooled vectors over consecutive max_tokens windows instead of
    /// truncating.
    bool chunk_mean = false;
    std::string weights_path;
    std::string vocab_path;
    /// Defaults to config.json beside the weights.
    std::string config_path;
};

struct EncoderInput {
    std::vector<int> ids;
    std::vector<std::uint8_t> mask;
};

/// Maps text to subword ids and ids to L x H hidden states.
class ContextualEncoder {
public:
    virtual ~ContextualEncoder() = default;

    virtual std::string kind() const = 0;
    virtual int hidden_size() const = 0;
    /// Subword ids without begin/end markers.
    virtual std::vector<int> tokenize(std::string_view text) const = 0;
    virtual Eigen::MatrixXd encode(const EncoderInput& input) const = 0;
    /// FNV-1a over every weight (or the seed for the stub).
    virtual std::uint64_t checksum() const = 0;

    virtual int cls_id() const = 0;
    virtual int sep_id() const = 0;
    virtual int pad_id() const = 0;
    virtual int unk_id() const = 0;
};

/// [CLS] + ids + [SEP], truncated to max_tokens in total and padded.
EncoderInput tokenize_truncate(std::string_view text, const ContextualEncoder& encoder, std::size_t max_tokens = 32);
EncoderInput make_encoder_input(std::span<const int> subwords, const ContextualEncoder& encoder,
                                std::size_t max_tokens);

Eigen::VectorXd pool_hidden(const Eigen::MatrixXd& hidden, const std::vector<std::uint8_t>& mask, Pooling pooling);
Eigen::VectorXd encode_pool(const EncoderInput& input, const ContextualEncoder& encoder, Pooling pooling = Pooling::first);
/// Truncated or chunk-averaged encoding of a whole text per config.
Eigen::VectorXd encode_text(std::string_view text, const ContextualEncoder& encoder, const EncoderConfig& config);

/// Hidden state of token t at position p is a unit vector drawn from an RNG
/// keyed by (seed, t, p). Whitespace tokenizer, FNV hash vocabulary with
/// PAD=0, UNK=1, CLS=2, SEP=3.
class StubEncoder : public ContextualEncoder {
public:
    explicit StubEncoder(std::uint64_t seed, int hidden = 768, int vocab_size = 30522);

    std::string kind() const override { return "stub"; }
    int hidden_size() const override { return hidden_; }
    std::vector<int> tokenize(std::string_view text) const override;
    Eigen::MatrixXd encode(const EncoderInput& input) const override;
    std::uint64_t checksum() const override;
    int cls_id() const override { return 2; }
    int sep_id() const override { return 3; }
    int pad_id() const override { return 0; }
    int unk_id() const override { return 1; }

    std::uint64_t seed() const { return seed_; }
    Eigen::VectorXd state(int token, std::size_t position) const;

private:
    std::uint64_t seed_;
    int hidden_;
    int vocab_size_;
};

std::unique_ptr<ContextualEncoder> make_stub_encoder(std::uint64_t seed, int hidden = 768);

struct TransformerConfig {
    int vocab_size = 30522;
    int dim = 768;
    int n_layers = 6;
    int n_heads = 12;
    int hidden_dim = 3072;
    int max_position = 512;
    double layer_norm_eps = 1e-12;
};

/// Linear weights are stored out x in; biases and norm parameters as
/// 1 x n rows.
struct TransformerLayer {
    Eigen::MatrixXd q_w, q_b, k_w, k_b, v_w, v_b, o_w, o_b;
    Eigen::MatrixXd ln1_g, ln1_b;
    Eigen::MatrixXd ff1_w, ff1_b, ff2_w, ff2_b;
    Eigen::MatrixXd ln2_g, ln2_b;
};

struct TransformerWeights {
    Eigen::MatrixXd word, position, emb_ln_g, emb_ln_b;
    std::vector<TransformerLayer> layers;

    /// Archive tensor names paired with their blocks.
    std::vector<std::pair<std::string, Eigen::MatrixXd*>> named_blocks();
    std::vector<std::pair<std::string, const Eigen::MatrixXd*>> named_blocks() const;
    std::vector<Eigen::MatrixXd*> blocks();
    TransformerWeights zeros_like() const;
};

/// Random weights (normal, std 0.02; norm gains near 1) for tests.
TransformerWeights random_transformer_weights(const TransformerConfig& config, std::uint64_t seed);

/// Row-wise layer norm. `normalized` receives the pre-affine values and
/// `inv_std` the per-row 1/sigma when non-null.
Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::MatrixXd& gain, const Eigen::MatrixXd& bias, double eps,
                           Eigen::MatrixXd* normalized = nullptr, Eigen::VectorXd* inv_std = nullptr);
double gelu(double x);
double gelu_derivative(double x);

struct TransformerCache {
    struct Layer {
        Eigen::MatrixXd input, q, k, v, ctx;
        std::vector<Eigen::MatrixXd> probs; // per head, L x L
        Eigen::MatrixXd norm1, s, f1, norm2;
        Eigen::VectorXd inv1, inv2;
    };
    std::vector<int> ids;
    std::vector<std::uint8_t> mask;
    Eigen::MatrixXd emb_norm;
    Eigen::VectorXd emb_inv;
    std::vector<Layer> layers;
};

/// Post-norm transformer encoder with masked multi-head self-attention and
/// exact GELU feed-forward blocks, computed in double precision.
class TransformerEncoder : public ContextualEncoder {
public:
    TransformerEncoder(TransformerConfig config, TransformerWeights weights, WordPiece tokenizer);

    /// Loads a named-tensor archive (optionally "distilbert."-prefixed
    /// names), a one-token-per-line vocabulary, and the architecture from
    /// config.json (inferred from tensor shapes when absent).
    static std::unique_ptr<TransformerEncoder> load(const std::filesystem::path& weights,
                                                    const std::filesystem::path& vocab,
                                                    const std::filesystem::path& config = {});

    std::string kind() const override { return "transformer"; }
    int hidden_size() const override { return config_.dim; }
    std::vector<int> tokenize(std::string_view text) const override { return tokenizer_.encode(text); }
    Eigen::MatrixXd encode(const EncoderInput& input) const override { return forward(input, nullptr); }
    std::uint64_t checksum() const override;
    int cls_id() const override { return tokenizer_.cls_id(); }
    int sep_id() const override { return tokenizer_.sep_id(); }
    int pad_id() const override { return tokenizer_.pad_id(); }
    int unk_id() const override { return tokenizer_.unk_id(); }

    Eigen::MatrixXd forward(const EncoderInput& input, TransformerCache* cache) const;
    /// Accumulates d(loss)/d(weights) given d(loss)/d(hidden states).
    void backward(const TransformerCache& cache, const Eigen::MatrixXd& d_hidden, TransformerWeights& grads) const;

    const TransformerConfig& config() const { return config_; }
    const TransformerWeights& weights() const { return weights_; }
    TransformerWeights& mutable_weights() { return weights_; }
    const WordPiece& tokenizer() const { return tokenizer_; }

private:
    TransformerConfig config_;
    TransformerWeights weights_;
    WordPiece tokenizer_;
};

/// Builds the encoder named by the config: the stub when weights_path is
/// "stub" or "stub:<seed>", the transformer otherwise.
std::unique_ptr<ContextualEncoder> load_encoder(const EncoderConfig& config, std::uint64_t seed);

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);

} // namespace mbti
