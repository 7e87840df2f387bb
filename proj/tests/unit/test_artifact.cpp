#include <bit>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <doctest.h>

#include "mbti/artifact.hpp"
#include "mbti/error.hpp"
#include "mbti/log.hpp"
#include "mbti/models.hpp"
#include "planted.hpp"

using namespace mbti;
namespace fs = std::filesystem;

namespace {

std::vector<const Record*> pointers(const Dataset& ds) {
    std::vector<const Record*> out;
    for (const auto& r : ds.records()) out.push_back(&r);
    return out;
}

/// Fits `spec` on a planted corpus, then compares in-memory predictions with
/// those of the reloaded artifact on 100 unseen documents.
void check_round_trip(const ModelSpec& spec, std::size_t filler = 30) {
    set_quiet(true);
    testing::PlantedOptions o;
    o.docs = 120;
    o.filler_tokens = filler;
    o.filler_vocab = 200;
    const Dataset train = testing::planted_corpus(o);
    o.docs = 100;
    o.seed = 4242;
    const Dataset probe = testing::planted_corpus(o);
    const auto train_ptrs = pointers(train);
    const auto probe_ptrs = pointers(probe);

    const auto shared = prepare_shared(spec, train, 13);
    TaskContext ctx;
    ctx.shared = shared;
    ctx.k = 500;
    auto clf = make_classifier(spec, ctx);
    clf->fit(train_ptrs, Task::EI, 13);
    const auto before = clf->predict(probe_ptrs);

    Artifact a;
    clf->save(a);
    const std::string bytes = serialize_artifact(a);
    const Artifact back = parse_artifact(bytes);
    CHECK(back.metadata == a.metadata);
    CHECK(back.tensors == a.tensors);
    CHECK(serialize_artifact(back) == bytes);

    const auto path = fs::temp_directory_path() / fmt::format("mbti_artifact_{}.bin", model_kind_name(spec.kind));
    save_artifact(a, path);
    const auto loaded = load_classifier(load_artifact(path));
    fs::remove(path);
    CHECK(loaded->kind() == spec.kind);
    const auto after = loaded->predict(probe_ptrs);
    REQUIRE(after.size() == before.size());
    std::size_t differ = 0;
    for (std::size_t i = 0; i < before.size(); ++i)
        if (std::bit_cast<std::uint64_t>(before[i].p1) != std::bit_cast<std::uint64_t>(after[i].p1) ||
            before[i].label != after[i].label)
            ++differ;
    CHECK(differ == 0);
}

} // namespace

TEST_CASE("artifact round trip reproduces predictions bit for bit") {
    ModelSpec spec;
    SUBCASE("majority") { spec.kind = ModelKind::Majority; }
    SUBCASE("bow-word") {
        spec.kind = ModelKind::BowWord;
        spec.k = 500;
    }
    SUBCASE("bow-char") {
        spec.kind = ModelKind::BowChar;
        spec.k = 500;
    }
    SUBCASE("lstm") {
        spec.kind = ModelKind::Lstm;
        spec.w2v.dim = 16;
        spec.w2v.min_count = 1;
        spec.w2v.epochs = 2;
        spec.seqnet.input_dim = 16;
        spec.seq_train.max_epochs = 2;
    }
    SUBCASE("encoder, frozen stub") {
        spec.kind = ModelKind::Encoder;
        spec.encoder.weights_path = "stub";
        spec.encoder.pooling = Pooling::mean;
        spec.head.hidden = 32;
        spec.head_train.max_epochs = 3;
    }
    SUBCASE("encoder, fine-tuned transformer") {
        const fs::path dir = fs::path(MBTI_FIXTURE_DIR) / "tiny_distilbert";
        spec.kind = ModelKind::Encoder;
        spec.encoder.weights_path = (dir / "model.safetensors").string();
        spec.encoder.vocab_path = (dir / "vocab.txt").string();
        spec.encoder.config_path = (dir / "config.json").string();
        spec.encoder.max_tokens = 8;
        spec.encoder.frozen = false;
        spec.head.hidden = 16;
        spec.head_train.max_epochs = 1;
    }
    check_round_trip(spec);
}

TEST_CASE("artifact tensors") {
    Artifact a;
    Eigen::MatrixXd m(2, 3);
    m << 1, 2, 3, 4, 5, -0.0;
    a.put("m", m);
    a.put("v", std::vector<double>{0.1, std::numeric_limits<double>::denorm_min()});
    a.put_ints("i", {-1, 0, std::numeric_limits<std::int64_t>::max()});
    a.metadata["name"] = "x";
    const Artifact back = parse_artifact(serialize_artifact(a));
    CHECK(back.matrix("m") == m);
    CHECK(std::signbit(back.matrix("m")(1, 2)));
    CHECK(back.vector("v") == a.vector("v"));
    CHECK(back.ints("i") == a.ints("i"));
    CHECK(back.has("m"));
    CHECK_FALSE(back.has("q"));
    CHECK_THROWS_AS(back.matrix("q"), SchemaError);
    CHECK_THROWS_AS(back.ints("m"), SchemaError);
}

TEST_CASE("artifact corruption is rejected") {
    Artifact a;
    a.put("v", std::vector<double>{1.0, 2.0, 3.0});
    a.metadata["model"] = "majority";
    const std::string bytes = serialize_artifact(a);
    REQUIRE(bytes.compare(0, 8, std::string("MBTIART\0", 8)) == 0);

    SUBCASE("bad magic") {
        std::string bad = bytes;
        bad[0] = 'X';
        CHECK_THROWS_AS(parse_artifact(bad), SchemaError);
    }
    SUBCASE("unsupported version") {
        std::string bad = bytes;
        const std::uint32_t v = Artifact::kVersion + 1;
        std::memcpy(bad.data() + 8, &v, sizeof v);
        CHECK_THROWS_AS(parse_artifact(bad), SchemaError);
    }
    SUBCASE("every truncation") {
        for (std::size_t n = 0; n < bytes.size(); ++n)
            CHECK_THROWS_AS(parse_artifact(std::string_view(bytes).substr(0, n)), SchemaError);
    }
    SUBCASE("trailing bytes") { CHECK_THROWS_AS(parse_artifact(bytes + "x"), SchemaError); }
    SUBCASE("missing file") { CHECK_THROWS_AS(load_artifact("/nonexistent/model.bin"), IoError); }
}
