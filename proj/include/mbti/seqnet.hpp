#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mbti/adam.hpp"
#include "mbti/word2vec.hpp"

namespace mbti {

class Rng;

/// Architecture of the attention-LSTM classifier.
struct SeqNetConfig {
    int input_dim = 300;
    int hidden = 15;
    int layers = 2;
    int attention = 15;
    int dense = 64;
    double dropout = 0.2;
    /// Alternative ordering: attention re-weights the input embeddings and
    /// the top LSTM's last real state is pooled.
    bool attention_first = false;
};

/// Gate blocks are stacked i, f, g, o (4H rows).
struct LstmParams {
    Eigen::MatrixXd W; // 4H x in
    Eigen::MatrixXd U; // 4H x H
    Eigen::MatrixXd b; // 4H x 1
};

struct AttentionParams {
    Eigen::MatrixXd W; // A x D
    Eigen::MatrixXd b; // A x 1
    Eigen::MatrixXd v; // A x 1
};

struct DenseParams {
    Eigen::MatrixXd W;
    Eigen::MatrixXd b;
};

struct SeqNetParams {
    std::vector<LstmParams> lstm;
    AttentionParams attention;
    DenseParams hidden; // H -> dense, ReLU
    DenseParams output; // dense -> 2, softmax

    std::vector<Eigen::MatrixXd*> blocks();
    std::vector<const Eigen::MatrixXd*> blocks() const;
    /// Names aligned with blocks(), e.g. "lstm0.W", "attention.v".
    std::vector<std::string> block_names() const;
    SeqNetParams zeros_like() const;
};

struct SeqNetModel {
    SeqNetConfig config;
    SeqNetParams params;
};

/// Glorot-uniform weights, zero biases, forget-gate bias 1.
SeqNetModel init_seqnet(const SeqNetConfig& config, std::uint64_t seed);

struct SeqForward {
    std::array<double, 2> probs{0.5, 0.5};
    /// Attention weight per input position (zeros on masked positions).
    std::vector<double> attention;
};

/// Forward pass. Dropout is applied only when `dropout_rng` is non-null.
/// An all-masked input pools a zero context vector.
SeqForward seqnet_forward(const SeqNetModel& model, const EmbeddedSequence& input,
                          Rng* dropout_rng = nullptr);

/// Mean cross-entropy over the batch; accumulates d(loss)/d(params) into
/// `grads` (which must be shaped like the model parameters). Throws
/// NumericError naming the block on a non-finite gradient.
double seqnet_gradients(const SeqNetModel& model, std::span<const EmbeddedSequence* const> batch,
                        std::span<const int> labels, SeqNetParams& grads, Rng* dropout_rng = nullptr);

struct SeqTrainConfig {
    AdamConfig adam{};
    int batch_size = 32;
    int max_epochs = 30;
    int patience = 3;
    std::size_t max_len = 64;
    std::uint64_t seed = 13;
};

struct SeqFitLog {
    int epochs_run = 0;
    int best_epoch = 0;
    double best_dev_f1 = 0.0;
    bool used_dev = true;
    std::vector<double> epoch_loss;
};

/// Adam training with early stopping on dev macro-F1 (patience epochs
/// without strict improvement); returns the best-dev parameters. An empty
/// dev set trains for max_epochs and returns the final parameters.
SeqNetModel fit_seqnet(std::span<const EmbeddedSequence> train, std::span<const int> train_labels,
                       std::span<const EmbeddedSequence> dev, std::span<const int> dev_labels,
                       const SeqNetConfig& arch, const SeqTrainConfig& config, SeqFitLog* log = nullptr);

} // namespace mbti
