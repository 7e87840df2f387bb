#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <fmt/format.h>
#include <json.hpp>

#include "mbti/cli.hpp"
#include "mbti/config.hpp"
#include "marginals.hpp"
#include "planted.hpp"

using namespace mbti;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    Run r;
    r.code = run_command(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("mbti_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

void write(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

testing::PlantedOptions small_planted() {
    testing::PlantedOptions o;
    o.docs = 80;
    o.phrase_len = 1;
    o.filler_tokens = 20;
    o.filler_vocab = 100;
    return o;
}

} // namespace

TEST_CASE("stats prints the class table") {
    TempDir dir("stats");
    write(dir / "en.jsonl", testing::marginal_jsonl("en", testing::kEnglish, 1));
    const auto r = run({"stats", "--input", dir / "en.jsonl", "--quiet"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("documents 6476\n") != std::string::npos);
    CHECK(r.out.find("E 1423  I 5053\n") != std::string::npos);
    CHECK(r.out.find("N 5625  S 851\n") != std::string::npos);
    CHECK(r.out.find("T 4168  F 2308\n") != std::string::npos);
    CHECK(r.out.find("P 3759  J 2717\n") != std::string::npos);
}

TEST_CASE("cv output directories are reproducible") {
    TempDir dir("cv");
    write(dir / "en.jsonl", testing::marginal_jsonl("en", testing::kEnglish, 1));
    const std::vector<std::string> base{"cv", "--model", "majority", "--task", "EI", "--seed", "13", "--quiet",
                                        "--input", dir / "en.jsonl"};
    auto with = [&](std::vector<std::string> extra) {
        auto args = base;
        args.insert(args.end(), extra.begin(), extra.end());
        return run(args);
    };
    const auto a = with({"--output", dir / "a"});
    const auto b = with({"--output", dir / "b"});
    const auto c = with({"--output", dir / "c", "--workers", "4"});
    REQUIRE(a.code == kExitOk);
    REQUIRE(b.code == kExitOk);
    REQUIRE(c.code == kExitOk);
    CHECK(a.out == b.out);
    CHECK(a.err.find("seed 13") != std::string::npos);
    for (const auto* name : {"report.tsv", "report.md", "results.EI.json", "folds.EI.tsv", "predictions.EI.jsonl"}) {
        CHECK(slurp(dir.path / "a" / name) == slurp(dir.path / "b" / name));
        CHECK(slurp(dir.path / "a" / name) == slurp(dir.path / "c" / name));
    }
    const auto config = slurp(dir.path / "a" / "config.txt");
    CHECK(config.rfind(fmt::format("# mbti {}\n", toolkit_version()), 0) == 0);
    CHECK(config.find("\nmodel = majority\n") != std::string::npos);
    CHECK(config.find("\nseed = 13\n") != std::string::npos);
    CHECK(slurp(dir.path / "a" / "report.tsv").rfind("task\tmodel\tAcc\tP\tR\tF1\twF1\nEI\tmajority\t", 0) == 0);

    SUBCASE("report merges result files") {
        const auto r = run({"report", (dir.path / "a").string(), "--format", "md"});
        CHECK(r.code == kExitOk);
        CHECK(r.out == slurp(dir.path / "a" / "report.md"));
    }
}

TEST_CASE("split writes identical plans on rerun") {
    TempDir dir("split");
    write(dir / "p.jsonl", testing::planted_jsonl(small_planted()));
    for (const auto* out : {"a", "b"})
        REQUIRE(run({"split", "--input", dir / "p.jsonl", "--task", "ALL", "--output", dir / out, "--quiet"}).code == kExitOk);
    for (const auto* t : {"EI", "NS", "TF", "PJ"}) {
        const auto name = fmt::format("folds.{}.json", t);
        CHECK(slurp(dir.path / "a" / name) == slurp(dir.path / "b" / name));
        const auto split = nlohmann::json::parse(slurp(dir.path / "a" / fmt::format("split.{}.json", t)));
        CHECK(split["dev_ids"].size() + split["test_ids"].size() == 80);
    }
}

TEST_CASE("train, predict, compare and explain") {
    TempDir dir("pipeline");
    write(dir / "p.jsonl", testing::planted_jsonl(small_planted()));
    const std::vector<std::string> common{"--input", dir / "p.jsonl", "--quiet", "--set", "bow.k=200"};
    auto args = [&](std::vector<std::string> head) {
        head.insert(head.end(), common.begin(), common.end());
        return head;
    };

    auto t1 = run(args({"train", "--model", "bow-word", "--output", dir / "m1"}));
    auto t2 = run(args({"train", "--model", "bow-word", "--output", dir / "m2"}));
    REQUIRE(t1.code == kExitOk);
    REQUIRE(t2.code == kExitOk);
    CHECK(slurp(dir.path / "m1" / "model.EI.mbti") == slurp(dir.path / "m2" / "model.EI.mbti"));

    REQUIRE(run(args({"predict", "--artifact", dir / "m1/model.EI.mbti", "--output", dir / "pa"})).code == kExitOk);
    REQUIRE(run(args({"predict", "--artifact", dir / "m2/model.EI.mbti", "--output", dir / "pb"})).code == kExitOk);
    const auto preds = read_prediction_labels(dir.path / "pa" / "predictions.EI.jsonl");
    CHECK(preds.size() == 80);
    const auto truth = read_truth_labels(dir.path / "p.jsonl", Task::EI);
    std::size_t correct = 0;
    for (const auto& [id, y] : truth) correct += preds.at(id) == y;
    CHECK(correct == 80);

    const auto cmp = run({"compare", "--a", dir / "pa/predictions.EI.jsonl", "--b", dir / "pb/predictions.EI.jsonl",
                          "--truth", dir / "p.jsonl", "--task", "EI"});
    REQUIRE(cmp.code == kExitOk);
    const auto j = nlohmann::json::parse(cmp.out);
    CHECK(j["p_value"].get<double>() == 1.0);
    CHECK(j["b"].get<int>() == 0);
    CHECK(j["c"].get<int>() == 0);

    const auto ex = run(args({"explain", "--artifact", dir / "m1/model.EI.mbti", "--output", dir / "ex"}));
    REQUIRE(ex.code == kExitOk);
    const auto weights = slurp(dir.path / "ex" / "weights.tsv");
    CHECK(weights.rfind("Weight\tEI\n", 0) == 0);
    CHECK(weights.find("omega") != std::string::npos);
    CHECK(weights.find("alpha") != std::string::npos);
    CHECK(slurp(dir.path / "ex" / "highlights.EI.txt").find("[omega:+") != std::string::npos);
}

TEST_CASE("compare reports missing ids") {
    TempDir dir("compare");
    write(dir / "a.jsonl", "{\"id\": \"x\", \"label\": 1}\n");
    write(dir / "t.jsonl", "{\"id\": \"x\", \"label\": 1}\n{\"id\": \"y\", \"label\": 0}\n");
    const auto r = run({"compare", "--a", dir / "a.jsonl", "--b", dir / "a.jsonl", "--truth", dir / "t.jsonl"});
    CHECK(r.code == kExitData);
    CHECK(r.err.find("'y'") != std::string::npos);
}

TEST_CASE("exit codes") {
    TempDir dir("codes");
    write(dir / "p.jsonl", testing::planted_jsonl(small_planted()));
    SUBCASE("usage") {
        CHECK(run({}).code == kExitUsage);
        CHECK(run({"frobnicate"}).code == kExitUsage);
        CHECK(run({"stats", "--bogus"}).code == kExitUsage);
        const auto r = run({"stats", "--input", dir / "p.jsonl", "--set", "colour=red"});
        CHECK(r.code == kExitUsage);
        CHECK(r.err.rfind("error: ", 0) == 0);
        CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
        CHECK(run({"stats"}).code == kExitUsage);
    }
    SUBCASE("data") {
        CHECK(run({"stats", "--input", dir / "missing.jsonl"}).code == kExitData);
        write(dir / "bad.jsonl", "not json\n");
        CHECK(run({"stats", "--input", dir / "bad.jsonl", "--quiet"}).code == kExitData);
        CHECK(run({"report", dir / "nothing-here"}).code == kExitData);
    }
    SUBCASE("numeric") {
        const auto r = run({"cv", "--model", "lstm", "--input", dir / "p.jsonl", "--output", dir / "o", "--quiet",
                            "--set", "w2v.lr=1e300", "--set", "w2v.dim=8", "--set", "w2v.min_count=1", "--set",
                            "lstm.max_epochs=1"});
        CHECK(r.code == kExitNumeric);
        CHECK(r.err.find("non-finite") != std::string::npos);
    }
    SUBCASE("help and version") {
        CHECK(run({"--help"}).code == kExitOk);
        const auto v = run({"--version"});
        CHECK(v.code == kExitOk);
        CHECK(v.out == fmt::format("{}\n", toolkit_version()));
    }
}

TEST_CASE("config file with command-line overrides") {
    TempDir dir("config");
    write(dir / "en.jsonl", testing::marginal_jsonl("en", testing::kEnglish, 1));
    write(dir / "run.cfg", "seed = 5\ntask = NS\nmodel = majority\n");
    const auto r = run({"cv", "--config", dir / "run.cfg", "--seed", "8", "--input", dir / "en.jsonl", "--output",
                        dir / "o", "--quiet"});
    REQUIRE(r.code == kExitOk);
    CHECK(r.err.find("seed 8") != std::string::npos);
    const auto config = slurp(dir.path / "o" / "config.txt");
    CHECK(config.find("\nseed = 8\n") != std::string::npos);
    CHECK(config.find("\ntask = NS\n") != std::string::npos);
    CHECK(fs::exists(dir.path / "o" / "results.NS.json"));
}

TEST_CASE("class table") {
    const auto table = render_class_table(class_distribution(testing::label_only("en", testing::kEnglish, 3)));
    CHECK(table == "E 1423  I 5053\nN 5625  S 851\nT 4168  F 2308\nP 3759  J 2717\n");
}
