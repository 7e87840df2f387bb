#include "mbti/word2vec.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "mbti/error.hpp"
#include "mbti/linear.hpp"
#include "mbti/random.hpp"

namespace mbti {

int W2vVocab::find(const std::string& word) const {
    auto it = index.find(word);
    return it == index.end() ? -1 : it->second;
}

int W2vVocab::sample(Rng& rng) const {
    const double u = rng.uniform();
    auto it = std::upper_bound(sampling_cdf.begin(), sampling_cdf.end(), u);
    if (it == sampling_cdf.end()) --it;
    return static_cast<int>(it - sampling_cdf.begin());
}

void W2vVocab::rebuild() {
    index.clear();
    total_count = 0;
    for (std::size_t i = 0; i < words.size(); ++i) {
        index.emplace(words[i], static_cast<int>(i));
        total_count += counts[i];
    }
    sampling_prob.assign(words.size(), 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < words.size(); ++i) {
        sampling_prob[i] = std::pow(static_cast<double>(counts[i]), 0.75);
        z += sampling_prob[i];
    }
    sampling_cdf.assign(words.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < words.size(); ++i) {
        sampling_prob[i] /= z;
        acc += sampling_prob[i];
        sampling_cdf[i] = acc;
    }
    if (!sampling_cdf.empty()) sampling_cdf.back() = 1.0;
}

W2vVocab build_vocab(std::span<const TokenList> corpus, int min_count) {
    std::map<std::string, std::uint64_t> counts;
    for (const auto& doc : corpus)
        for (const auto& tok : doc) ++counts[tok];
    std::vector<std::pair<std::string, std::uint64_t>> kept;
    for (const auto& [w, c] : counts)
        if (c >= static_cast<std::uint64_t>(std::max(min_count, 1))) kept.emplace_back(w, c);
    if (kept.empty()) throw DataError(fmt::format("word2vec vocabulary empty at min_count={}", min_count));
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    W2vVocab v;
    for (auto& [w, c] : kept) {
        v.words.push_back(w);
        v.counts.push_back(c);
    }
    v.rebuild();
    return v;
}

Eigen::VectorXd EmbeddingTable::vector(const std::string& word) const {
    const int id = vocab.find(word);
    if (id < 0) return Eigen::VectorXd::Zero(input.cols());
    return input.row(id).transpose();
}

EmbeddingTable init_embeddings(W2vVocab vocab, int dim, std::uint64_t seed) {
    if (dim < 1) throw ConfigError("embedding dimension must be >= 1");
    EmbeddingTable t;
    const auto V = static_cast<Eigen::Index>(vocab.size());
    t.vocab = std::move(vocab);
    t.input.resize(V, dim);
    t.output = RowMatrix::Zero(V, dim);
    Rng rng(derive_seed(seed, 0x1417));
    const double half = 0.5 / dim;
    for (Eigen::Index i = 0; i < V; ++i)
        for (Eigen::Index k = 0; k < dim; ++k) t.input(i, k) = rng.uniform(-half, half);
    return t;
}

SgnsGradients sgns_gradients(const Eigen::VectorXd& center, const Eigen::VectorXd& context,
                             std::span<const Eigen::VectorXd> negatives) {
    SgnsGradients g;
    const double pos = context.dot(center);
    // -log s(x) = softplus(-x)
    g.loss = softplus(-pos);
    const double gp = sigmoid(pos) - 1.0;
    g.d_center = gp * context;
    g.d_context = gp * center;
    for (const auto& u : negatives) {
        const double s = u.dot(center);
        g.loss += softplus(s);
        const double gn = sigmoid(s);
        g.d_center += gn * u;
        g.d_negatives.push_back(gn * center);
    }
    return g;
}

double sgns_step(EmbeddingTable& table, int center, int context, std::span<const int> negatives,
                 double lr) {
    const Eigen::VectorXd v = table.input.row(center).transpose();
    const Eigen::VectorXd u = table.output.row(context).transpose();
    std::vector<Eigen::VectorXd> negs;
    for (int n : negatives) negs.push_back(table.output.row(n).transpose());
    const auto g = sgns_gradients(v, u, negs);
    table.input.row(center) -= lr * g.d_center.transpose();
    table.output.row(context) -= lr * g.d_context.transpose();
    for (std::size_t k = 0; k < negatives.size(); ++k)
        table.output.row(negatives[k]) -= lr * g.d_negatives[k].transpose();
    return g.loss;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

namespace {

// Element access for the single-worker (plain) and multi-worker (relaxed
// atomic, racy) update paths.
struct PlainAccess {
    static double load(const double& x) { return x; }
    static void store(double& x, double v) { x = v; }
};

struct RelaxedAccess {
    static double load(const double& x) {
        return std::atomic_ref<double>(const_cast<double&>(x)).load(std::memory_order_relaxed);
    }
    static void store(double& x, double v) {
        std::atomic_ref<double>(x).store(v, std::memory_order_relaxed);
    }
};

template <class Access>
void sgns_update(EmbeddingTable& t, int center, int context, std::span<const int> negatives,
                 double lr, std::vector<double>& neu1e) {
    const auto dim = static_cast<std::size_t>(t.input.cols());
    double* v = t.input.row(center).data();
    std::fill(neu1e.begin(), neu1e.end(), 0.0);
    auto apply = [&](int target, double label) {
        double* u = t.output.row(target).data();
        double f = 0.0;
        for (std::size_t k = 0; k < dim; ++k) f += Access::load(v[k]) * Access::load(u[k]);
        const double g = (label - sigmoid(f)) * lr;
        for (std::size_t k = 0; k < dim; ++k) neu1e[k] += g * Access::load(u[k]);
        for (std::size_t k = 0; k < dim; ++k) Access::store(u[k], Access::load(u[k]) + g * Access::load(v[k]));
    };
    apply(context, 1.0);
    for (int n : negatives) apply(n, 0.0);
    for (std::size_t k = 0; k < dim; ++k) Access::store(v[k], Access::load(v[k]) + neu1e[k]);
}

struct TrainPlan {
    std::vector<std::vector<int>> docs; // in-vocabulary ids
    std::uint64_t total_tokens = 0;
};

TrainPlan plan_corpus(const EmbeddingTable& table, std::span<const TokenList> corpus) {
    TrainPlan plan;
    plan.docs.reserve(corpus.size());
    for (const auto& doc : corpus) {
        std::vector<int> ids;
        ids.reserve(doc.size());
        for (const auto& tok : doc) {
            const int id = table.vocab.find(tok);
            if (id >= 0) ids.push_back(id);
        }
        plan.total_tokens += ids.size();
        plan.docs.push_back(std::move(ids));
    }
    return plan;
}

template <class Access>
void train_range(EmbeddingTable& table, const TrainPlan& plan, const W2vConfig& cfg,
                 std::size_t begin, std::size_t end, std::uint64_t stream,
                 std::atomic<std::uint64_t>& processed, std::uint64_t grand_total) {
    Rng rng(derive_seed(cfg.seed, 0x5EED, stream));
    std::vector<double> neu1e(static_cast<std::size_t>(table.input.cols()));
    std::vector<int> negs;
    std::vector<int> sentence;
    const double threshold = cfg.subsample * static_cast<double>(table.vocab.total_count);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t d = begin; d < end; ++d) {
            const auto& doc = plan.docs[d];
            sentence.clear();
            for (int id : doc) {
                if (cfg.subsample > 0.0) {
                    const double f = static_cast<double>(table.vocab.counts[static_cast<std::size_t>(id)]);
                    const double keep = (std::sqrt(f / threshold) + 1.0) * threshold / f;
                    if (keep < rng.uniform()) continue;
                }
                sentence.push_back(id);
            }
            const double progress = static_cast<double>(processed.load(std::memory_order_relaxed)) /
                                    static_cast<double>(grand_total + 1);
            const double lr = cfg.learning_rate * std::max(1e-4, 1.0 - progress);
            const auto n = static_cast<long>(sentence.size());
            for (long pos = 0; pos < n; ++pos) {
                const long reduced = static_cast<long>(cfg.window) -
                                     static_cast<long>(rng.below(static_cast<std::uint64_t>(cfg.window)));
                const int center = sentence[static_cast<std::size_t>(pos)];
                for (long c = pos - reduced; c <= pos + reduced; ++c) {
                    if (c == pos || c < 0 || c >= n) continue;
                    const int context = sentence[static_cast<std::size_t>(c)];
                    negs.clear();
                    for (int k = 0; k < cfg.negatives; ++k) {
                        const int s = table.vocab.sample(rng);
                        if (s != context) negs.push_back(s);
                    }
                    sgns_update<Access>(table, center, context, negs, lr, neu1e);
                }
            }
            processed.fetch_add(doc.size(), std::memory_order_relaxed);
        }
    }
}

} // namespace

void train_skipgram(EmbeddingTable& table, std::span<const TokenList> corpus, const W2vConfig& cfg) {
    if (cfg.window < 1 || cfg.negatives < 1 || cfg.epochs < 0)
        throw ConfigError("word2vec: window, negatives must be >= 1 and epochs >= 0");
    const auto plan = plan_corpus(table, corpus);
    const std::uint64_t grand_total = plan.total_tokens * static_cast<std::uint64_t>(cfg.epochs);
    std::atomic<std::uint64_t> processed{0};
    const auto workers = static_cast<std::size_t>(std::max(cfg.workers, 1));
    if (workers == 1 || plan.docs.size() < workers) {
        train_range<PlainAccess>(table, plan, cfg, 0, plan.docs.size(), 0, processed, grand_total);
    } else {
        std::vector<std::thread> threads;
        const std::size_t chunk = (plan.docs.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t b = w * chunk;
            const std::size_t e = std::min(plan.docs.size(), b + chunk);
            if (b >= e) break;
            threads.emplace_back([&, b, e, w] {
                train_range<RelaxedAccess>(table, plan, cfg, b, e, w, processed, grand_total);
            });
        }
        for (auto& th : threads) th.join();
    }
    if (!table.input.allFinite() || !table.output.allFinite())
        throw NumericError("word2vec training produced non-finite embeddings");
}

EmbeddingTable train_skipgram(std::span<const TokenList> corpus, const W2vConfig& cfg) {
    if (cfg.dim < 1) throw ConfigError("word2vec: dim must be >= 1");
    auto table = init_embeddings(build_vocab(corpus, cfg.min_count), cfg.dim, cfg.seed);
    train_skipgram(table, corpus, cfg);
    return table;
}

EmbeddedSequence embed_sequence(const EmbeddingTable& table, const TokenList& tokens, std::size_t max_len) {
    EmbeddedSequence seq;
    seq.x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(max_len), table.input.cols());
    seq.mask.assign(max_len, 0);
    seq.length = std::min(max_len, tokens.size());
    for (std::size_t p = 0; p < seq.length; ++p) {
        seq.mask[p] = 1;
        const int id = table.vocab.find(tokens[p]);
        if (id >= 0) seq.x.row(static_cast<Eigen::Index>(p)) = table.input.row(id);
    }
    return seq;
}

EmbeddingTable load_text_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot read embeddings '{}'", path.string()));
    std::vector<std::string> words;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    long dim = -1;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string word;
        if (!(ss >> word)) continue;
        std::vector<double> vals;
        double v;
        while (ss >> v) vals.push_back(v);
        if (line_no == 1 && vals.size() == 1) continue; // "V d" header
        if (dim < 0) dim = static_cast<long>(vals.size());
        if (static_cast<long>(vals.size()) != dim || dim == 0)
            throw SchemaError(fmt::format("{}:{}: expected {} components", path.string(), line_no, dim));
        words.push_back(word);
        rows.push_back(std::move(vals));
    }
    if (words.empty()) throw SchemaError(fmt::format("no embeddings in '{}'", path.string()));
    W2vVocab vocab;
    vocab.words = words;
    vocab.counts.assign(words.size(), 1);
    vocab.rebuild();
    if (vocab.index.size() != words.size())
        throw SchemaError(fmt::format("duplicate words in '{}'", path.string()));
    EmbeddingTable t;
    t.vocab = std::move(vocab);
    t.input.resize(static_cast<Eigen::Index>(rows.size()), dim);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (long k = 0; k < dim; ++k) t.input(static_cast<Eigen::Index>(i), k) = rows[i][static_cast<std::size_t>(k)];
    t.output = RowMatrix::Zero(t.input.rows(), t.input.cols());
    return t;
}

void save_text_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError(fmt::format("cannot write embeddings '{}'", path.string()));
    out << table.input.rows() << ' ' << table.input.cols() << '\n';
    for (Eigen::Index i = 0; i < table.input.rows(); ++i) {
        out << table.vocab.words[static_cast<std::size_t>(i)];
        for (Eigen::Index k = 0; k < table.input.cols(); ++k) out << ' ' << fmt::format("{:.17g}", table.input(i, k));
        out << '\n';
    }
}

} // namespace mbti
