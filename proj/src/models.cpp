#include "mbti/models.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "mbti/error.hpp"
#include "mbti/log.hpp"
#include "mbti/metrics.hpp"
#include "mbti/random.hpp"

namespace mbti {

using nlohmann::json;

std::string_view model_kind_name(ModelKind kind) {
    switch (kind) {
    case ModelKind::Majority: return "majority";
    case ModelKind::BowWord: return "bow-word";
    case ModelKind::BowChar: return "bow-char";
    case ModelKind::Lstm: return "lstm";
    case ModelKind::Encoder: return "encoder";
    }
    return "?";
}

ModelKind parse_model_kind(std::string_view name) {
    for (auto k : {ModelKind::Majority, ModelKind::BowWord, ModelKind::BowChar, ModelKind::Lstm, ModelKind::Encoder})
        if (model_kind_name(k) == name) return k;
    throw ConfigError(fmt::format("unknown model '{}' (expected majority, bow-word, bow-char, lstm or encoder)", name));
}

std::string encoder_text(const Document& doc) {
    std::string out;
    for (const auto& t : doc.tokens) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

namespace {

std::vector<int> labels_of(std::span<const Record* const> recs, Task task) {
    std::vector<int> y;
    y.reserve(recs.size());
    for (const auto* r : recs) y.push_back(r->labels.get(task));
    return y;
}

std::vector<TokenList> tokens_of(std::span<const Record* const> recs) {
    std::vector<TokenList> out;
    out.reserve(recs.size());
    for (const auto* r : recs) out.push_back(r->doc.tokens);
    return out;
}

template <class T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(v[i]);
    return out;
}

void require_both_classes(std::span<const int> y, std::string_view who) {
    const auto ones = std::count(y.begin(), y.end(), 1);
    if (ones == 0 || ones == static_cast<std::ptrdiff_t>(y.size()))
        throw DataError(fmt::format("{}: training labels contain a single class", who));
}

} // namespace

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> inner_split(std::span<const Record* const> train, Task task,
                                                                          double ratio, std::uint64_t seed) {
    std::vector<std::size_t> fit, hold;
    if (ratio > 0.0 && train.size() >= 10) {
        const auto y = labels_of(train, task);
        std::vector<std::string> keys;
        for (const auto* r : train) keys.push_back(r->doc.id);
        hold = stratified_holdout(y, keys, ratio, derive_seed(seed, 0xDE7));
    }
    std::vector<bool> held(train.size(), false);
    for (auto h : hold) held[h] = true;
    for (std::size_t i = 0; i < train.size(); ++i)
        if (!held[i]) fit.push_back(i);
    return {fit, hold};
}

// ---------------------------------------------------------------- context

SharedContext prepare_shared(const ModelSpec& spec, const Dataset& ds, std::uint64_t seed) {
    SharedContext ctx;
    if (spec.kind == ModelKind::Lstm) {
        if (!spec.embeddings_path.empty()) {
            ctx.embeddings = std::make_shared<EmbeddingTable>(load_text_embeddings(spec.embeddings_path));
        } else {
            std::vector<TokenList> corpus;
            corpus.reserve(ds.size());
            for (const auto& r : ds.records()) corpus.push_back(r.doc.tokens);
            W2vConfig c = spec.w2v;
            c.seed = seed;
            ctx.embeddings = std::make_shared<EmbeddingTable>(train_skipgram(corpus, c));
        }
    } else if (spec.kind == ModelKind::Encoder) {
        std::shared_ptr<ContextualEncoder> enc = load_encoder(spec.encoder, seed);
        if (!spec.encoder.frozen && !dynamic_cast<const TransformerEncoder*>(enc.get()))
            throw ConfigError("fine-tune mode needs transformer weights; the stub encoder has no parameters");
        if (spec.encoder.frozen) {
            auto cache = std::make_shared<std::unordered_map<std::string, Eigen::VectorXd>>();
            for (const auto& r : ds.records()) {
                auto text = encoder_text(r.doc);
                if (!cache->count(text)) cache->emplace(text, encode_text(text, *enc, spec.encoder));
            }
            ctx.encoded = std::move(cache);
        }
        ctx.encoder = std::move(enc);
    }
    return ctx;
}

TaskContext prepare_task(const ModelSpec& spec, const SharedContext& shared, std::span<const Record* const> dev,
                         Task task, std::uint64_t seed) {
    TaskContext ctx;
    ctx.shared = shared;
    ctx.k = spec.k;
    if ((spec.kind == ModelKind::BowWord || spec.kind == ModelKind::BowChar) && spec.k == 0) {
        if (dev.empty()) throw ConfigError("k search needs a non-empty development split (or set bow.k)");
        auto res = search_k(dev, task, spec.k_candidates, spec.vectorizer(), spec.linear, seed);
        ctx.k = res.best_k;
        ctx.k_scores = std::move(res.scores);
    }
    return ctx;
}

std::unique_ptr<Classifier> make_classifier(const ModelSpec& spec, const TaskContext& ctx) {
    switch (spec.kind) {
    case ModelKind::Majority: return std::make_unique<MajorityClassifier>();
    case ModelKind::BowWord:
    case ModelKind::BowChar: {
        if (ctx.k == 0) throw ConfigError("bag-of-words model needs k (run the k search first)");
        return std::make_unique<BowClassifier>(spec.kind, spec.vectorizer(), spec.linear, ctx.k);
    }
    case ModelKind::Lstm:
        if (!ctx.shared.embeddings) throw ConfigError("lstm model needs embeddings (prepare_shared)");
        return std::make_unique<LstmClassifier>(ctx.shared.embeddings, spec.seqnet, spec.seq_train, spec.inner_dev_ratio);
    case ModelKind::Encoder:
        if (!ctx.shared.encoder) throw ConfigError("encoder model needs an encoder (prepare_shared)");
        return std::make_unique<EncoderClassifier>(ctx.shared.encoder, ctx.shared.encoded, spec.encoder, spec.head,
                                                   spec.head_train, spec.finetune_lr, spec.inner_dev_ratio);
    }
    throw ConfigError("unknown model kind");
}

std::unique_ptr<Classifier> load_classifier(const Artifact& a) {
    const auto model = a.metadata.value("model", std::string{});
    if (model.empty()) throw SchemaError("artifact metadata lacks 'model'");
    switch (parse_model_kind(model)) {
    case ModelKind::Majority: return MajorityClassifier::load(a);
    case ModelKind::BowWord:
    case ModelKind::BowChar: return BowClassifier::load(a);
    case ModelKind::Lstm: return LstmClassifier::load(a);
    case ModelKind::Encoder: return EncoderClassifier::load(a);
    }
    throw SchemaError("unknown model kind in artifact");
}

// ---------------------------------------------------------------- majority

void MajorityClassifier::fit(std::span<const Record* const> train, Task task, std::uint64_t) {
    if (train.empty()) throw DataError("majority: empty training set");
    const auto y = labels_of(train, task);
    label_ = MajorityBaseline::fit(y).label();
    p1_ = static_cast<double>(std::count(y.begin(), y.end(), 1)) / static_cast<double>(y.size());
}

std::vector<Prediction> MajorityClassifier::predict(std::span<const Record* const> docs) const {
    return std::vector<Prediction>(docs.size(), Prediction{p1_, label_});
}

void MajorityClassifier::save(Artifact& out) const {
    out.metadata["model"] = "majority";
    out.metadata["label"] = label_;
    out.put("majority.p1", std::vector<double>{p1_});
}

std::unique_ptr<MajorityClassifier> MajorityClassifier::load(const Artifact& a) {
    auto m = std::make_unique<MajorityClassifier>();
    m->label_ = a.metadata.at("label").get<int>();
    m->p1_ = a.vector("majority.p1").at(0);
    return m;
}

// ---------------------------------------------------------------- bag of words

BowClassifier::BowClassifier(ModelKind kind, VectorizerConfig vectorizer, TrainConfig linear, std::size_t k)
    : kind_(kind), vectorizer_(vectorizer), linear_(linear), k_(k) {}

void BowClassifier::fit(std::span<const Record* const> train, Task task, std::uint64_t) {
    const auto y = labels_of(train, task);
    require_both_classes(y, model_kind_name(kind_));
    const auto docs = tokens_of(train);
    tfidf_ = fit_tfidf(docs, vectorizer_.analyzer, vectorizer_.ngram_range, vectorizer_.min_df);
    const SparseMatrix X = transform_tfidf(docs, tfidf_);
    selector_ = anova_f_select(X, y, k_);
    model_ = fit_logreg(selector_.apply(X), y, linear_, &report_);
}

SparseVector BowClassifier::features(const TokenList& tokens) const {
    return selector_.apply(transform_tfidf(tokens, tfidf_));
}

std::vector<Prediction> BowClassifier::predict(std::span<const Record* const> docs) const {
    std::vector<Prediction> out;
    out.reserve(docs.size());
    for (const auto* r : docs) out.push_back(model_.predict(features(r->doc.tokens)));
    return out;
}

void BowClassifier::save(Artifact& out) const {
    out.metadata["model"] = model_kind_name(kind_);
    out.metadata["analyzer"] = analyzer_name(tfidf_.vocab.analyzer);
    out.metadata["ngram_range"] = {tfidf_.vocab.ngram_range.lo, tfidf_.vocab.ngram_range.hi};
    out.metadata["min_df"] = tfidf_.min_df;
    out.metadata["n_docs"] = tfidf_.n_docs;
    out.metadata["l2_norm"] = tfidf_.l2_norm;
    out.metadata["k"] = k_;
    out.metadata["terms"] = tfidf_.vocab.terms;
    out.put("tfidf.idf", tfidf_.idf);
    out.put_ints("tfidf.df", std::vector<std::int64_t>(tfidf_.vocab.df.begin(), tfidf_.vocab.df.end()));
    out.put_ints("selector.selected",
                 std::vector<std::int64_t>(selector_.selected.begin(), selector_.selected.end()));
    out.put("selector.f_scores", selector_.f_scores);
    out.put("logreg.w", std::vector<double>(model_.w.data(), model_.w.data() + model_.w.size()));
    out.put("logreg.b", std::vector<double>{model_.b});
}

std::unique_ptr<BowClassifier> BowClassifier::load(const Artifact& a) {
    const auto kind = parse_model_kind(a.metadata.at("model").get<std::string>());
    VectorizerConfig vec;
    vec.analyzer = parse_analyzer(a.metadata.at("analyzer").get<std::string>());
    const auto range = a.metadata.at("ngram_range").get<std::vector<int>>();
    if (range.size() != 2) throw SchemaError("artifact ngram_range must have two entries");
    vec.ngram_range = {range[0], range[1]};
    vec.min_df = a.metadata.at("min_df").get<int>();
    auto m = std::make_unique<BowClassifier>(kind, vec, TrainConfig{}, a.metadata.at("k").get<std::size_t>());
    auto& t = m->tfidf_;
    t.vocab.terms = a.metadata.at("terms").get<std::vector<std::string>>();
    for (auto d : a.ints("tfidf.df")) t.vocab.df.push_back(static_cast<std::uint32_t>(d));
    t.vocab.analyzer = vec.analyzer;
    t.vocab.ngram_range = vec.ngram_range;
    t.vocab.rebuild_index();
    t.idf = a.vector("tfidf.idf");
    t.n_docs = a.metadata.at("n_docs").get<std::size_t>();
    t.min_df = vec.min_df;
    t.l2_norm = a.metadata.at("l2_norm").get<bool>();
    if (t.idf.size() != t.vocab.size() || t.vocab.df.size() != t.vocab.size())
        throw SchemaError("artifact vocabulary and idf sizes differ");
    for (auto s : a.ints("selector.selected")) m->selector_.selected.push_back(static_cast<std::uint32_t>(s));
    m->selector_.f_scores = a.vector("selector.f_scores");
    m->selector_.k = m->k_;
    const auto w = a.vector("logreg.w");
    if (w.size() != m->selector_.selected.size()) throw SchemaError("artifact weight and selection sizes differ");
    m->model_.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    m->model_.b = a.vector("logreg.b").at(0);
    return m;
}

// ---------------------------------------------------------------- lstm

LstmClassifier::LstmClassifier(std::shared_ptr<const EmbeddingTable> embeddings, SeqNetConfig arch, SeqTrainConfig train,
                               double inner_dev_ratio)
    : embeddings_(std::move(embeddings)), arch_(arch), train_(train), inner_dev_ratio_(inner_dev_ratio) {
    arch_.input_dim = embeddings_->dim();
}

void LstmClassifier::fit(std::span<const Record* const> train, Task task, std::uint64_t seed) {
    const auto y = labels_of(train, task);
    require_both_classes(y, "lstm");
    std::vector<EmbeddedSequence> seqs;
    seqs.reserve(train.size());
    for (const auto* r : train) seqs.push_back(embed_sequence(*embeddings_, r->doc.tokens, train_.max_len));
    const auto [fit_idx, hold_idx] = inner_split(train, task, inner_dev_ratio_, seed);
    SeqTrainConfig cfg = train_;
    cfg.seed = seed;
    model_ = fit_seqnet(pick(seqs, fit_idx), pick(y, fit_idx), pick(seqs, hold_idx), pick(y, hold_idx), arch_, cfg, &log_);
}

std::vector<Prediction> LstmClassifier::predict(std::span<const Record* const> docs) const {
    std::vector<Prediction> out;
    out.reserve(docs.size());
    for (const auto* r : docs) {
        const auto f = seqnet_forward(model_, embed_sequence(*embeddings_, r->doc.tokens, train_.max_len));
        out.push_back({f.probs[1], f.probs[1] > f.probs[0] ? 1 : 0});
    }
    return out;
}

void LstmClassifier::save(Artifact& out) const {
    const auto& c = model_.config;
    out.metadata["model"] = "lstm";
    out.metadata["seqnet"] = {{"input_dim", c.input_dim}, {"hidden", c.hidden},       {"layers", c.layers},
                              {"attention", c.attention}, {"dense", c.dense},         {"dropout", c.dropout},
                              {"attention_first", c.attention_first}};
    out.metadata["max_len"] = train_.max_len;
    out.metadata["w2v_words"] = embeddings_->vocab.words;
    out.put_ints("w2v.counts",
                 std::vector<std::int64_t>(embeddings_->vocab.counts.begin(), embeddings_->vocab.counts.end()));
    out.put("w2v.input", Eigen::MatrixXd(embeddings_->input));
    const auto names = model_.params.block_names();
    const auto blocks = model_.params.blocks();
    for (std::size_t i = 0; i < blocks.size(); ++i) out.put("seqnet." + names[i], *blocks[i]);
}

std::unique_ptr<LstmClassifier> LstmClassifier::load(const Artifact& a) {
    auto table = std::make_shared<EmbeddingTable>();
    table->vocab.words = a.metadata.at("w2v_words").get<std::vector<std::string>>();
    for (auto c : a.ints("w2v.counts")) table->vocab.counts.push_back(static_cast<std::uint64_t>(c));
    if (table->vocab.counts.size() != table->vocab.words.size()) throw SchemaError("artifact w2v vocabulary sizes differ");
    table->vocab.rebuild();
    table->input = a.matrix("w2v.input");
    if (static_cast<std::size_t>(table->input.rows()) != table->vocab.size())
        throw SchemaError("artifact embedding rows do not match the vocabulary");
    const auto& j = a.metadata.at("seqnet");
    SeqNetConfig arch;
    arch.input_dim = j.at("input_dim").get<int>();
    arch.hidden = j.at("hidden").get<int>();
    arch.layers = j.at("layers").get<int>();
    arch.attention = j.at("attention").get<int>();
    arch.dense = j.at("dense").get<int>();
    arch.dropout = j.at("dropout").get<double>();
    arch.attention_first = j.at("attention_first").get<bool>();
    SeqTrainConfig train;
    train.max_len = a.metadata.at("max_len").get<std::size_t>();
    auto m = std::make_unique<LstmClassifier>(table, arch, train, 0.0);
    m->model_.config = arch;
    m->model_.params = init_seqnet(arch, 0).params;
    const auto names = m->model_.params.block_names();
    const auto blocks = m->model_.params.blocks();
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        auto mat = a.matrix("seqnet." + names[i]);
        if (mat.rows() != blocks[i]->rows() || mat.cols() != blocks[i]->cols())
            throw SchemaError(fmt::format("artifact tensor seqnet.{} has the wrong shape", names[i]));
        *blocks[i] = std::move(mat);
    }
    return m;
}

// ---------------------------------------------------------------- encoder

EncoderClassifier::EncoderClassifier(std::shared_ptr<const ContextualEncoder> encoder,
                                     std::shared_ptr<const std::unordered_map<std::string, Eigen::VectorXd>> encoded,
                                     EncoderConfig config, HeadConfig head, HeadTrainConfig train, double finetune_lr,
                                     double inner_dev_ratio)
    : encoder_(std::move(encoder)),
      encoded_(std::move(encoded)),
      config_(std::move(config)),
      head_config_(head),
      train_(train),
      finetune_lr_(finetune_lr),
      inner_dev_ratio_(inner_dev_ratio) {}

Eigen::VectorXd EncoderClassifier::pooled(const Record& r) const {
    auto text = encoder_text(r.doc);
    if (encoded_) {
        auto it = encoded_->find(text);
        if (it != encoded_->end()) return it->second;
    }
    return encode_text(text, *encoder_, config_);
}

void EncoderClassifier::fit(std::span<const Record* const> train, Task task, std::uint64_t seed) {
    const auto y = labels_of(train, task);
    require_both_classes(y, "encoder");
    const auto [fit_idx, hold_idx] = inner_split(train, task, inner_dev_ratio_, seed);
    HeadTrainConfig cfg = train_;
    cfg.seed = seed;
    if (config_.frozen) {
        std::vector<Eigen::VectorXd> x;
        x.reserve(train.size());
        for (const auto* r : train) x.push_back(pooled(*r));
        head_ = fit_head(pick(x, fit_idx), pick(y, fit_idx), pick(x, hold_idx), pick(y, hold_idx), head_config_, cfg, &log_);
        return;
    }
    const auto* base = dynamic_cast<const TransformerEncoder*>(encoder_.get());
    if (!base) throw ConfigError("fine-tune mode needs transformer weights");
    auto tuned = std::make_shared<TransformerEncoder>(*base);
    std::vector<EncoderInput> inputs;
    inputs.reserve(train.size());
    for (const auto* r : train) inputs.push_back(tokenize_truncate(encoder_text(r->doc), *tuned, config_.max_tokens));
    cfg.adam.lr = finetune_lr_;
    head_ = fit_head_finetune(*tuned, pick(inputs, fit_idx), pick(y, fit_idx), pick(inputs, hold_idx), pick(y, hold_idx),
                              config_.pooling, head_config_, cfg, &log_);
    encoder_ = std::move(tuned);
    encoded_.reset();
}

std::vector<Prediction> EncoderClassifier::predict(std::span<const Record* const> docs) const {
    std::vector<Prediction> out;
    out.reserve(docs.size());
    for (const auto* r : docs) {
        const auto p = head_forward(head_, pooled(*r));
        out.push_back({p[1], argmax2(p)});
    }
    return out;
}

void EncoderClassifier::save(Artifact& out) const {
    out.metadata["model"] = "encoder";
    json enc = {{"kind", encoder_->kind()},
                {"max_tokens", config_.max_tokens},
                {"pooling", pooling_name(config_.pooling)},
                {"chunk_mean", config_.chunk_mean},
                {"frozen", config_.frozen},
                {"checksum", encoder_->checksum()}};
    if (const auto* stub = dynamic_cast<const StubEncoder*>(encoder_.get())) {
        enc["seed"] = stub->seed();
        enc["hidden"] = stub->hidden_size();
    } else if (const auto* tr = dynamic_cast<const TransformerEncoder*>(encoder_.get())) {
        const auto& c = tr->config();
        enc["config"] = {{"vocab_size", c.vocab_size}, {"dim", c.dim},
                         {"n_layers", c.n_layers},     {"n_heads", c.n_heads},
                         {"hidden_dim", c.hidden_dim}, {"max_position_embeddings", c.max_position}};
        if (config_.frozen) {
            enc["weights_path"] = config_.weights_path;
            enc["vocab_path"] = config_.vocab_path;
            enc["config_path"] = config_.config_path;
        } else {
            std::vector<std::string> vocab;
            for (std::size_t i = 0; i < tr->tokenizer().size(); ++i) vocab.push_back(tr->tokenizer().token(static_cast<int>(i)));
            enc["vocab"] = std::move(vocab);
            for (const auto& [name, m] : tr->weights().named_blocks()) out.put("encoder." + name, *m);
        }
    }
    out.metadata["encoder"] = std::move(enc);
    out.metadata["head"] = {{"hidden", head_config_.hidden}, {"dropout", head_config_.dropout}};
    auto params = head_.params;
    const auto names = params.block_names();
    const auto blocks = params.blocks();
    for (std::size_t i = 0; i < blocks.size(); ++i) out.put(names[i], *blocks[i]);
}

std::unique_ptr<EncoderClassifier> EncoderClassifier::load(const Artifact& a) {
    const auto& e = a.metadata.at("encoder");
    EncoderConfig cfg;
    cfg.max_tokens = e.at("max_tokens").get<std::size_t>();
    cfg.pooling = parse_pooling(e.at("pooling").get<std::string>());
    cfg.chunk_mean = e.at("chunk_mean").get<bool>();
    cfg.frozen = e.at("frozen").get<bool>();
    const auto checksum = e.at("checksum").get<std::uint64_t>();
    const auto kind = e.at("kind").get<std::string>();
    std::shared_ptr<const ContextualEncoder> enc;
    if (kind == "stub") {
        enc = std::make_shared<StubEncoder>(e.at("seed").get<std::uint64_t>(), e.at("hidden").get<int>());
    } else if (kind == "transformer") {
        if (cfg.frozen) {
            cfg.weights_path = e.at("weights_path").get<std::string>();
            cfg.vocab_path = e.at("vocab_path").get<std::string>();
            cfg.config_path = e.value("config_path", std::string{});
            enc = TransformerEncoder::load(cfg.weights_path, cfg.vocab_path, cfg.config_path);
        } else {
            const auto& jc = e.at("config");
            TransformerConfig tc;
            tc.vocab_size = jc.at("vocab_size").get<int>();
            tc.dim = jc.at("dim").get<int>();
            tc.n_layers = jc.at("n_layers").get<int>();
            tc.n_heads = jc.at("n_heads").get<int>();
            tc.hidden_dim = jc.at("hidden_dim").get<int>();
            tc.max_position = jc.at("max_position_embeddings").get<int>();
            TransformerWeights w = random_transformer_weights(tc, 0);
            for (auto& [name, m] : w.named_blocks()) {
                auto mat = a.matrix("encoder." + name);
                if (mat.rows() != m->rows() || mat.cols() != m->cols())
                    throw SchemaError(fmt::format("artifact tensor encoder.{} has the wrong shape", name));
                *m = std::move(mat);
            }
            enc = std::make_shared<TransformerEncoder>(tc, std::move(w),
                                                       WordPiece(e.at("vocab").get<std::vector<std::string>>()));
        }
    } else {
        throw SchemaError(fmt::format("unknown encoder kind '{}' in artifact", kind));
    }
    if (enc->checksum() != checksum)
        throw DataError("encoder weights differ from those the model was trained with (checksum mismatch)");
    HeadConfig hc;
    hc.hidden = a.metadata.at("head").at("hidden").get<int>();
    hc.dropout = a.metadata.at("head").at("dropout").get<double>();
    auto m = std::make_unique<EncoderClassifier>(enc, nullptr, cfg, hc, HeadTrainConfig{}, 0.0, 0.0);
    m->head_ = init_head(enc->hidden_size(), hc, 0);
    const auto names = m->head_.params.block_names();
    const auto blocks = m->head_.params.blocks();
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        auto mat = a.matrix(names[i]);
        if (mat.rows() != blocks[i]->rows() || mat.cols() != blocks[i]->cols())
            throw SchemaError(fmt::format("artifact tensor {} has the wrong shape", names[i]));
        *blocks[i] = std::move(mat);
    }
    return m;
}

} // namespace mbti
