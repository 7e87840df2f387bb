#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mbti/adam.hpp"
#include "mbti/encoder.hpp"

namespace mbti {

class Rng;

struct HeadConfig {
    int hidden = 512;
    double dropout = 0.5;
};

struct HeadParams {
    Eigen::MatrixXd W1, b1; // hidden x H, hidden x 1
    Eigen::MatrixXd W2, b2; // 2 x hidden, 2 x 1

    std::vector<Eigen::MatrixXd*> blocks();
    std::vector<std::string> block_names() const;
    HeadParams zeros_like() const;
};

struct HeadModel {
    HeadConfig config;
    HeadParams params;

    int input_dim() const { return static_cast<int>(params.W1.cols()); }
};

/// Glorot-uniform weights and zero biases; `zero_output` zeroes the output
/// layer so the initial prediction is exactly (0.5, 0.5).
HeadModel init_head(int input_dim, const HeadConfig& config, std::uint64_t seed, bool zero_output = false);

/// Dropout is applied only when `dropout_rng` is non-null.
std::array<double, 2> head_forward(const HeadModel& model, const Eigen::VectorXd& x, Rng* dropout_rng = nullptr);

/// Mean cross-entropy; accumulates parameter gradients into `grads` and, when
/// `input_grads` is non-null, stores d(loss)/d(input) per example.
double head_gradients(const HeadModel& model, std::span<const Eigen::VectorXd* const> batch, std::span<const int> labels,
                      HeadParams& grads, Rng* dropout_rng = nullptr, std::vector<Eigen::VectorXd>* input_grads = nullptr);

struct HeadTrainConfig {
    AdamConfig adam{};
    int batch_size = 32;
    int max_epochs = 30;
    int patience = 3;
    std::uint64_t seed = 13;
};

struct HeadFitLog {
    int epochs_run = 0;
    int best_epoch = 0;
    double best_dev_f1 = 0.0;
    bool used_dev = true;
    std::vector<double> epoch_loss;
};

/// Adam on pooled vectors with early stopping on dev macro-F1; returns the
/// best-dev parameters.
HeadModel fit_head(std::span<const Eigen::VectorXd> train, std::span<const int> train_labels,
                   std::span<const Eigen::VectorXd> dev, std::span<const int> dev_labels, const HeadConfig& arch,
                   const HeadTrainConfig& config, HeadFitLog* log = nullptr);

/// Joint training of the head and every encoder weight (fine-tune mode).
/// The encoder is updated in place and restored to its best-dev state.
HeadModel fit_head_finetune(TransformerEncoder& encoder, std::span<const EncoderInput> train,
                            std::span<const int> train_labels, std::span<const EncoderInput> dev,
                            std::span<const int> dev_labels, Pooling pooling, const HeadConfig& arch,
                            const HeadTrainConfig& config, HeadFitLog* log = nullptr);

inline int argmax2(const std::array<double, 2>& p) { return p[1] > p[0] ? 1 : 0; }

} // namespace mbti
