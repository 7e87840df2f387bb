#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mbti/artifact.hpp"
#include "mbti/corpus.hpp"
#include "mbti/encoder.hpp"
#include "mbti/head.hpp"
#include "mbti/linear.hpp"
#include "mbti/seqnet.hpp"
#include "mbti/vectorize.hpp"
#include "mbti/word2vec.hpp"

namespace mbti {

enum class ModelKind { Majority, BowWord, BowChar, Lstm, Encoder };

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

/// Every hyperparameter of every model family.
struct ModelSpec {
    ModelKind kind = ModelKind::Majority;

    VectorizerConfig word_vectorizer = default_vectorizer(Analyzer::Word);
    VectorizerConfig char_vectorizer = default_vectorizer(Analyzer::Char);
    TrainConfig linear{};
    /// 0 searches k on the development split.
    std::size_t k = 0;
    std::vector<std::size_t> k_candidates = default_k_candidates();

    W2vConfig w2v{};
    /// Pretrained "word v1 ... vd" table; skip-gram training when empty.
    std::string embeddings_path;
    SeqNetConfig seqnet{};
    SeqTrainConfig seq_train{};

    EncoderConfig encoder{};
    HeadConfig head{};
    HeadTrainConfig head_train{};
    /// Learning rate used instead of head_train.adam.lr in fine-tune mode.
    double finetune_lr = 2e-5;

    /// Share of each training set held out for early stopping of the
    /// neural models.
    double inner_dev_ratio = 0.1;

    const VectorizerConfig& vectorizer() const {
        return kind == ModelKind::BowChar ? char_vectorizer : word_vectorizer;
    }
};

/// Label-free state shared by every fold of a run: embeddings trained on the
/// corpus text, the contextual encoder and its cached pooled vectors.
struct SharedContext {
    std::shared_ptr<const EmbeddingTable> embeddings;
    std::shared_ptr<const ContextualEncoder> encoder;
    /// Encoder text -> pooled encoder vector (frozen mode).
    std::shared_ptr<const std::unordered_map<std::string, Eigen::VectorXd>> encoded;
};

/// Per-task state fixed on the development split.
struct TaskContext {
    SharedContext shared;
    std::size_t k = 0;
    std::vector<std::pair<std::size_t, double>> k_scores;
};

SharedContext prepare_shared(const ModelSpec& spec, const Dataset& ds, std::uint64_t seed);
/// Runs the k search for bag-of-words models when spec.k == 0.
TaskContext prepare_task(const ModelSpec& spec, const SharedContext& shared, std::span<const Record* const> dev,
                         Task task, std::uint64_t seed);

/// Text handed to the contextual encoder: the preprocessed tokens joined by
/// single spaces.
std::string encoder_text(const Document& doc);

class Classifier {
public:
    virtual ~Classifier() = default;

    virtual ModelKind kind() const = 0;
    virtual void fit(std::span<const Record* const> train, Task task, std::uint64_t seed) = 0;
    virtual std::vector<Prediction> predict(std::span<const Record* const> docs) const = 0;
    /// Writes metadata and tensors sufficient for load_classifier.
    virtual void save(Artifact& out) const = 0;
};

std::unique_ptr<Classifier> make_classifier(const ModelSpec& spec, const TaskContext& context);
std::unique_ptr<Classifier> load_classifier(const Artifact& artifact);

class MajorityClassifier : public Classifier {
public:
    ModelKind kind() const override { return ModelKind::Majority; }
    void fit(std::span<const Record* const> train, Task task, std::uint64_t seed) override;
    std::vector<Prediction> predict(std::span<const Record* const> docs) const override;
    void save(Artifact& out) const override;
    static std::unique_ptr<MajorityClassifier> load(const Artifact& a);

    int label() const { return label_; }

private:
    int label_ = 0;
    double p1_ = 0.5;
};

/// TF-IDF n-grams, ANOVA selection and L2 logistic regression.
class BowClassifier : public Classifier {
public:
    BowClassifier(ModelKind kind, VectorizerConfig vectorizer, TrainConfig linear, std::size_t k);

    ModelKind kind() const override { return kind_; }
    void fit(std::span<const Record* const> train, Task task, std::uint64_t seed) override;
    std::vector<Prediction> predict(std::span<const Record* const> docs) const override;
    void save(Artifact& out) const override;
    static std::unique_ptr<BowClassifier> load(const Artifact& a);

    /// Selected-feature vector of a token list.
    SparseVector features(const TokenList& tokens) const;
    const TfidfModel& tfidf() const { return tfidf_; }
    const FeatureSelector& selector() const { return selector_; }
    const LogisticModel& model() const { return model_; }
    /// Term of selected column j.
    const std::string& term(std::size_t j) const { return tfidf_.vocab.terms[selector_.selected[j]]; }
    const FitReport& fit_report() const { return report_; }

private:
    ModelKind kind_;
    VectorizerConfig vectorizer_;
    TrainConfig linear_;
    std::size_t k_;
    TfidfModel tfidf_;
    FeatureSelector selector_;
    LogisticModel model_;
    FitReport report_;
};

class LstmClassifier : public Classifier {
public:
    LstmClassifier(std::shared_ptr<const EmbeddingTable> embeddings, SeqNetConfig arch, SeqTrainConfig train,
                   double inner_dev_ratio);

    ModelKind kind() const override { return ModelKind::Lstm; }
    void fit(std::span<const Record* const> train, Task task, std::uint64_t seed) override;
    std::vector<Prediction> predict(std::span<const Record* const> docs) const override;
    void save(Artifact& out) const override;
    static std::unique_ptr<LstmClassifier> load(const Artifact& a);

    const SeqNetModel& model() const { return model_; }
    const SeqFitLog& fit_log() const { return log_; }

private:
    std::shared_ptr<const EmbeddingTable> embeddings_;
    SeqNetConfig arch_;
    SeqTrainConfig train_;
    double inner_dev_ratio_;
    SeqNetModel model_;
    SeqFitLog log_;
};

class EncoderClassifier : public Classifier {
public:
    EncoderClassifier(std::shared_ptr<const ContextualEncoder> encoder,
                      std::shared_ptr<const std::unordered_map<std::string, Eigen::VectorXd>> encoded,
                      EncoderConfig config, HeadConfig head, HeadTrainConfig train, double finetune_lr,
                      double inner_dev_ratio);

    ModelKind kind() const override { return ModelKind::Encoder; }
    void fit(std::span<const Record* const> train, Task task, std::uint64_t seed) override;
    std::vector<Prediction> predict(std::span<const Record* const> docs) const override;
    void save(Artifact& out) const override;
    static std::unique_ptr<EncoderClassifier> load(const Artifact& a);

    Eigen::VectorXd pooled(const Record& r) const;
    const HeadModel& head() const { return head_; }
    const ContextualEncoder& encoder() const { return *encoder_; }
    const HeadFitLog& fit_log() const { return log_; }

private:
    std::shared_ptr<const ContextualEncoder> encoder_;
    std::shared_ptr<const std::unordered_map<std::string, Eigen::VectorXd>> encoded_;
    EncoderConfig config_;
    HeadConfig head_config_;
    HeadTrainConfig train_;
    double finetune_lr_;
    double inner_dev_ratio_;
    HeadModel head_;
    HeadFitLog log_;
};

/// Stratified split of a training set into (fit, early-stopping) parts.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> inner_split(std::span<const Record* const> train, Task task,
                                                                          double ratio, std::uint64_t seed);

} // namespace mbti
