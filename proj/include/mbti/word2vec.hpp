#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "mbti/corpus.hpp"

namespace mbti {

class Rng;

struct W2vConfig {
    int dim = 300;
    int window = 8;
    int negatives = 5;
    int epochs = 5;
    double learning_rate = 0.025;
    double subsample = 1e-3;
    int min_count = 5;
    std::uint64_t seed = 13;
    /// > 1 enables racy lock-free updates (not reproducible).
    int workers = 1;
};

/// Vocabulary ordered by count (descending), ties by term. The sampling
/// distribution is proportional to count^0.75.
struct W2vVocab {
    std::vector<std::string> words;
    std::vector<std::uint64_t> counts;
    std::unordered_map<std::string, int> index;
    std::vector<double> sampling_prob;
    std::vector<double> sampling_cdf;
    std::uint64_t total_count = 0;

    std::size_t size() const { return words.size(); }
    int find(const std::string& word) const;
    /// Draws a word id from the unigram^0.75 distribution.
    int sample(Rng& rng) const;
    void rebuild();
};

/// Counts tokens and keeps those with count >= min_count. Throws DataError
/// when nothing survives.
W2vVocab build_vocab(std::span<const TokenList> corpus, int min_count);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct EmbeddingTable {
    W2vVocab vocab;
    RowMatrix input;  // V x dim, row per word
    RowMatrix output; // V x dim, negative-sampling weights

    int dim() const { return static_cast<int>(input.cols()); }
    /// Zero vector for out-of-vocabulary words.
    Eigen::VectorXd vector(const std::string& word) const;
};

/// Input rows uniform in +-0.5/dim, output rows zero.
EmbeddingTable init_embeddings(W2vVocab vocab, int dim, std::uint64_t seed);

/// Skip-gram negative-sampling loss for one (center, context, negatives)
/// triple, -log s(u_ctx.v) - sum log s(-u_neg.v), with gradients with
/// respect to the center input vector and every output vector.
struct SgnsGradients {
    double loss = 0.0;
    Eigen::VectorXd d_center;
    Eigen::VectorXd d_context;
    std::vector<Eigen::VectorXd> d_negatives;
};

SgnsGradients sgns_gradients(const Eigen::VectorXd& center, const Eigen::VectorXd& context,
                             std::span<const Eigen::VectorXd> negatives);

/// One SGD step on the triple; returns the loss before the update.
double sgns_step(EmbeddingTable& table, int center, int context, std::span<const int> negatives,
                 double lr);

/// Trains on token lists only; labels never reach the trainer.
EmbeddingTable train_skipgram(std::span<const TokenList> corpus, const W2vConfig& config);
/// Continues training an existing table (vocabulary fixed).
void train_skipgram(EmbeddingTable& table, std::span<const TokenList> corpus, const W2vConfig& config);

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct EmbeddedSequence {
    Eigen::MatrixXd x;         // max_len x dim
    std::vector<std::uint8_t> mask; // 1 for real positions
    std::size_t length = 0;    // real positions (prefix)
};

/// Truncates / zero-pads to max_len; OOV tokens are real positions with a
/// zero row.
EmbeddedSequence embed_sequence(const EmbeddingTable& table, const TokenList& tokens, std::size_t max_len);

/// Reads the "word v1 ... vd" text format (an optional "V d" header line
/// is skipped).
EmbeddingTable load_text_embeddings(const std::filesystem::path& path);
void save_text_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

} // namespace mbti
