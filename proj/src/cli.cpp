#include "mbti/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "mbti/artifact.hpp"
#include "mbti/cv.hpp"
#include "mbti/error.hpp"
#include "mbti/explain.hpp"
#include "mbti/log.hpp"
#include "mbti/models.hpp"

namespace mbti {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot read '{}'", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

/// Calls `fn(line_no, object)` for every non-blank JSON-lines record.
template <class Fn>
void for_each_json_line(const fs::path& path, Fn&& fn) {
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw SchemaError(fmt::format("{}:{}: malformed JSON ({})", path.string(), line_no, e.what()));
        }
        if (!obj.is_object()) throw SchemaError(fmt::format("{}:{}: record is not an object", path.string(), line_no));
        fn(line_no, obj);
    }
}

int binary_label(const json& v, const fs::path& path, std::size_t line_no) {
    if (v.is_number_integer()) {
        const auto x = v.get<long>();
        if (x == 0 || x == 1) return static_cast<int>(x);
    }
    throw SchemaError(fmt::format("{}:{}: label must be 0 or 1", path.string(), line_no));
}

std::string id_of(const json& obj, const fs::path& path, std::size_t line_no) {
    auto it = obj.find("id");
    if (it == obj.end() || !it->is_string())
        throw SchemaError(fmt::format("{}:{}: missing string field 'id'", path.string(), line_no));
    return it->get<std::string>();
}

struct CommonOptions {
    std::string config_file;
    std::vector<std::string> sets;
    std::string seed, workers, model, task, input, output;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config_file, "Configuration file (key = value lines)");
    cmd->add_option("--set", o.sets, "Override a configuration key (key=value)")->allow_extra_args(false);
    cmd->add_option("--seed", o.seed, "Random seed (default 13)");
    cmd->add_option("--workers", o.workers, "Cross-validation worker threads");
    cmd->add_option("--model", o.model, "majority | bow-word | bow-char | lstm | encoder");
    cmd->add_option("--task", o.task, "EI | NS | TF | PJ | ALL");
    cmd->add_option("--input", o.input, "Corpus in JSON-lines format");
    cmd->add_option("--output", o.output, "Output directory");
    cmd->add_flag("--quiet", o.quiet, "Suppress warnings");
}

RunConfig build_config(const CommonOptions& o) {
    RunConfig cfg;
    if (!o.config_file.empty()) cfg.load_file(o.config_file);
    for (const auto& s : o.sets) cfg.set_assignment(s);
    if (!o.seed.empty()) cfg.set("seed", o.seed);
    if (!o.workers.empty()) cfg.set("cv.workers", o.workers);
    if (!o.model.empty()) cfg.set("model", o.model);
    if (!o.task.empty()) cfg.set("task", o.task);
    if (!o.input.empty()) cfg.set("input", o.input);
    if (!o.output.empty()) cfg.set("output", o.output);
    return cfg;
}

/// Keys that change how a run executes but not what it computes.
bool is_runtime_key(const std::string& key) { return key == "cv.workers" || key == "output"; }

json config_snapshot(const RunConfig& cfg) {
    json j = json::object();
    for (const auto& key : RunConfig::known_keys())
        if (!is_runtime_key(key)) j[key] = cfg.get(key);
    return j;
}

StopwordRegistry load_stopwords(const RunConfig& cfg) {
    fs::path dir = cfg.get("stopwords_dir");
    if (dir.empty()) dir = default_stopwords_dir();
    if (dir.empty()) {
        warn("no stopword directory found; stopwords are kept");
        return {};
    }
    if (!fs::is_directory(dir)) throw IoError(fmt::format("stopword directory '{}' does not exist", dir.string()));
    return StopwordRegistry::load_dir(dir);
}

Dataset load_dataset(const RunConfig& cfg, bool require_labels) {
    const auto& input = cfg.get("input");
    if (input.empty()) throw ConfigError("missing --input corpus");
    IngestOptions options;
    options.per_author = cfg.get_bool("per_author");
    options.require_labels = require_labels;
    IngestReport report;
    Dataset ds = ingest_corpus(input, options, &report);
    constexpr std::size_t kShown = 5;
    for (std::size_t i = 0; i < std::min(kShown, report.warnings.size()); ++i) warn("{}: {}", input, report.warnings[i]);
    if (report.warnings.size() > kShown) warn("{}: {} more warnings", input, report.warnings.size() - kShown);
    const auto stopwords = load_stopwords(cfg);
    if (!stopwords.has(ds.lang())) warn("no stopword list for language '{}'", ds.lang());
    preprocess_dataset(ds, stopwords);
    return ds;
}

fs::path prepare_output(const RunConfig& cfg) {
    fs::path dir = cfg.get("output");
    if (dir.empty()) throw ConfigError("missing --output directory");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
    write_file(dir / "config.txt", cfg.render());
    return dir;
}

std::vector<const Record*> records_of(const Dataset& ds, const std::vector<std::string>& ids) {
    std::vector<const Record*> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(&ds[ds.index_of(id)]);
    return out;
}

std::vector<const Record*> all_records(const Dataset& ds) {
    std::vector<const Record*> out;
    out.reserve(ds.size());
    for (const auto& r : ds.records()) out.push_back(&r);
    return out;
}

json split_json(const SplitPlan& s, Task task) {
    return {{"task", task_name(task)}, {"seed", s.seed}, {"dev_ratio", s.dev_ratio}, {"dev_ids", s.dev_ids},
            {"test_ids", s.test_ids}};
}

json folds_json(const FoldPlan& f) {
    json assignment = json::object();
    for (const auto& [id, fold] : f.assignment) assignment[id] = fold;
    return {{"task", task_name(f.task)}, {"seed", f.seed}, {"k", f.k}, {"assignment", assignment}};
}

std::string jsonl(const std::vector<json>& rows) {
    std::string out;
    for (const auto& r : rows) out += r.dump() + "\n";
    return out;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

int cmd_stats(const RunConfig& cfg, std::ostream& out) {
    const Dataset ds = load_dataset(cfg, true);
    const std::string table = fmt::format("documents {}\n", ds.size()) + render_class_table(class_distribution(ds));
    out << table;
    if (!cfg.get("output").empty()) write_file(prepare_output(cfg) / "stats.txt", table);
    return kExitOk;
}

int cmd_split(const RunConfig& cfg, std::ostream& out) {
    const Dataset ds = load_dataset(cfg, true);
    const auto dir = prepare_output(cfg);
    const auto seed = cfg.get_uint("seed");
    for (Task task : cfg.tasks()) {
        const auto [split, folds] = split_and_fold(ds, cfg.get_double("cv.dev_ratio"),
                                                   static_cast<int>(cfg.get_int("cv.k")), task, seed);
        const auto name = task_name(task);
        write_file(dir / fmt::format("split.{}.json", name), split_json(split, task).dump(2) + "\n");
        write_file(dir / fmt::format("folds.{}.json", name), folds_json(folds).dump(2) + "\n");
        out << fmt::format("{}: dev {}  test {}  folds {}\n", name, split.dev_ids.size(), split.test_ids.size(), folds.k);
    }
    return kExitOk;
}

/// Model fitted on every record, with hyperparameters chosen on the dev split.
std::unique_ptr<Classifier> fit_deployable(const ModelSpec& spec, const SharedContext& shared, const Dataset& ds,
                                           const RunConfig& cfg, Task task) {
    const auto seed = cfg.get_uint("seed");
    const auto [split, folds] =
        split_and_fold(ds, cfg.get_double("cv.dev_ratio"), static_cast<int>(cfg.get_int("cv.k")), task, seed);
    const auto dev = records_of(ds, split.dev_ids);
    const TaskContext ctx = prepare_task(spec, shared, dev, task, seed);
    auto clf = make_classifier(spec, ctx);
    clf->fit(all_records(ds), task, seed);
    return clf;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
    const auto spec = cfg.model_spec();
    const Dataset ds = load_dataset(cfg, true);
    const auto dir = prepare_output(cfg);
    const auto seed = cfg.get_uint("seed");
    const SharedContext shared = prepare_shared(spec, ds, seed);
    for (Task task : cfg.tasks()) {
        auto clf = fit_deployable(spec, shared, ds, cfg, task);
        Artifact a;
        clf->save(a);
        const auto letters = task_letters(task);
        a.metadata["task"] = task_name(task);
        a.metadata["labels"] = {std::string(1, letters.first), std::string(1, letters.second)};
        a.metadata["seed"] = seed;
        a.metadata["toolkit_version"] = toolkit_version();
        a.metadata["config"] = config_snapshot(cfg);
        const auto path = dir / fmt::format("model.{}.mbti", task_name(task));
        save_artifact(a, path);
        out << fmt::format("{}: wrote {}\n", task_name(task), path.string());
    }
    return kExitOk;
}

int cmd_cv(const RunConfig& cfg, std::ostream& out) {
    const auto spec = cfg.model_spec();
    const Dataset ds = load_dataset(cfg, true);
    const auto dir = prepare_output(cfg);
    const auto seed = cfg.get_uint("seed");
    const int k = static_cast<int>(cfg.get_int("cv.k"));
    const int workers = static_cast<int>(cfg.get_int("cv.workers"));
    const SharedContext shared = prepare_shared(spec, ds, seed);
    std::vector<CvResult> results;
    for (Task task : cfg.tasks()) {
        const auto [split, folds] = split_and_fold(ds, cfg.get_double("cv.dev_ratio"), k, task, seed);
        const auto dev = records_of(ds, split.dev_ids);
        const TaskContext ctx = prepare_task(spec, shared, dev, task, seed);
        CvResult r = run_cv(spec, ctx, ds, folds, seed, workers);
        const auto name = task_name(task);

        json j = cv_result_to_json(r);
        j["dev_size"] = split.dev_ids.size();
        j["test_size"] = split.test_ids.size();
        json scores = json::array();
        for (const auto& [kk, f1] : ctx.k_scores) scores.push_back({{"k", kk}, {"macro_f1", f1}});
        j["k_scores"] = scores;
        write_file(dir / fmt::format("results.{}.json", name), j.dump(2) + "\n");
        write_file(dir / fmt::format("folds.{}.tsv", name), render_folds(r));
        std::vector<json> rows;
        for (const auto& p : r.predictions)
            rows.push_back({{"id", p.id}, {"label", p.label}, {"p1", p.p1}, {"fold", p.fold}, {"truth", p.truth}});
        write_file(dir / fmt::format("predictions.{}.jsonl", name), jsonl(rows));
        results.push_back(std::move(r));
    }
    const auto tsv = render_report(results, ReportFormat::Tsv);
    write_file(dir / "report.tsv", tsv);
    write_file(dir / "report.md", render_report(results, ReportFormat::Markdown));
    out << tsv;
    return kExitOk;
}

int cmd_predict(const RunConfig& cfg, const std::string& artifact_path, std::ostream& out) {
    if (artifact_path.empty()) throw ConfigError("missing --artifact model file");
    const Artifact a = load_artifact(artifact_path);
    const auto clf = load_classifier(a);
    if (!a.metadata.contains("task")) throw SchemaError("artifact does not record its task");
    const Task task = parse_task(a.metadata["task"].get<std::string>());
    const Dataset ds = load_dataset(cfg, false);
    const auto dir = prepare_output(cfg);
    const auto recs = all_records(ds);
    const auto preds = clf->predict(recs);
    std::vector<json> rows;
    for (std::size_t i = 0; i < recs.size(); ++i)
        rows.push_back({{"id", recs[i]->doc.id}, {"label", preds[i].label}, {"p1", preds[i].p1}});
    const auto path = dir / fmt::format("predictions.{}.jsonl", task_name(task));
    write_file(path, jsonl(rows));
    out << fmt::format("{}: {} predictions written to {}\n", task_name(task), rows.size(), path.string());
    return kExitOk;
}

int cmd_compare(const RunConfig& cfg, const std::string& a, const std::string& b, const std::string& truth,
                std::ostream& out) {
    if (a.empty() || b.empty() || truth.empty()) throw ConfigError("compare needs --a, --b and --truth");
    const auto tasks = cfg.tasks();
    if (tasks.size() != 1) throw ConfigError("compare scores a single task");
    const auto result = compare_prediction_files(a, b, truth, tasks.front());
    const auto text = mcnemar_to_json(result).dump(2) + "\n";
    out << text;
    if (!cfg.get("output").empty()) write_file(prepare_output(cfg) / "mcnemar.json", text);
    return kExitOk;
}

int cmd_explain(RunConfig cfg, const std::vector<std::string>& artifact_paths, std::ostream& out) {
    if (!cfg.is_set("model")) cfg.set("model", "bow-word");
    const Dataset ds = load_dataset(cfg, true);
    const auto dir = prepare_output(cfg);
    const auto seed = cfg.get_uint("seed");
    const int rounds = static_cast<int>(cfg.get_int("explain.rounds"));
    const auto top_n = static_cast<std::size_t>(std::max(1L, cfg.get_int("explain.top_n")));
    const auto n_docs = static_cast<std::size_t>(std::max(0L, cfg.get_int("explain.documents")));
    if (rounds < 0) throw ConfigError("explain.rounds must be >= 0");

    std::vector<std::pair<Task, std::unique_ptr<Classifier>>> models;
    if (!artifact_paths.empty()) {
        for (const auto& p : artifact_paths) {
            const Artifact a = load_artifact(p);
            if (!a.metadata.contains("task")) throw SchemaError(fmt::format("artifact '{}' does not record its task", p));
            models.emplace_back(parse_task(a.metadata["task"].get<std::string>()), load_classifier(a));
        }
    } else {
        const auto spec = cfg.model_spec();
        if (spec.kind != ModelKind::BowWord && spec.kind != ModelKind::BowChar)
            throw ConfigError("explain supports the bow-word and bow-char models");
        const SharedContext shared = prepare_shared(spec, ds, seed);
        for (Task task : cfg.tasks()) models.emplace_back(task, fit_deployable(spec, shared, ds, cfg, task));
    }

    const auto docs = all_records(ds);
    std::vector<Task> tasks;
    std::vector<TopFeatures> tops;
    for (const auto& [task, clf] : models) {
        const auto* bow = dynamic_cast<const BowClassifier*>(clf.get());
        if (!bow) throw ConfigError("explain supports the bow-word and bow-char models");
        tasks.push_back(task);
        tops.push_back(top_features(*bow, docs, task, top_n, rounds, seed));
        std::string text;
        for (std::size_t i = 0; i < std::min(n_docs, docs.size()); ++i) {
            text += fmt::format("# {}\n", docs[i]->doc.id);
            text += render_highlight(highlight_document(*bow, docs[i]->doc.tokens), task);
        }
        write_file(dir / fmt::format("highlights.{}.txt", task_name(task)), text);
    }
    const auto table = render_weights_tsv(tasks, tops);
    write_file(dir / "weights.tsv", table);
    out << table;
    return kExitOk;
}

std::vector<fs::path> result_files(const std::vector<std::string>& inputs) {
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p)) {
                const auto name = e.path().filename().string();
                if (e.is_regular_file() && name.starts_with("results.") && name.ends_with(".json"))
                    found.push_back(e.path());
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else if (fs::is_regular_file(p)) {
            files.push_back(p);
        } else {
            throw IoError(fmt::format("no such file or directory '{}'", in));
        }
    }
    return files;
}

int cmd_report(const RunConfig& cfg, const std::vector<std::string>& inputs, const std::string& format,
               std::ostream& out) {
    if (inputs.empty()) throw ConfigError("report needs at least one results file or directory");
    const auto fmt_kind = parse_report_format(format);
    std::vector<CvResult> results;
    for (const auto& f : result_files(inputs)) {
        json j;
        try {
            j = json::parse(read_file(f));
        } catch (const json::exception& e) {
            throw SchemaError(fmt::format("{}: malformed JSON ({})", f.string(), e.what()));
        }
        results.push_back(cv_result_from_json(j));
    }
    if (results.empty()) throw DataError("no results.*.json files found");
    const auto text = render_report(results, fmt_kind);
    out << text;
    if (!cfg.get("output").empty())
        write_file(prepare_output(cfg) / (fmt_kind == ReportFormat::Tsv ? "report.tsv" : "report.md"), text);
    return kExitOk;
}

} // namespace

std::string render_class_table(const ClassCounts& counts) {
    std::string out;
    for (Task task : kAllTasks) {
        const auto [a, b] = task_letters(task);
        const auto [n0, n1] = counts.pair(task);
        out += fmt::format("{} {}  {} {}\n", a, n0, b, n1);
    }
    return out;
}

std::map<std::string, int> read_prediction_labels(const fs::path& path) {
    std::map<std::string, int> out;
    for_each_json_line(path, [&](std::size_t line_no, const json& obj) {
        auto id = id_of(obj, path, line_no);
        if (!obj.contains("label")) throw SchemaError(fmt::format("{}:{}: missing 'label'", path.string(), line_no));
        const int label = binary_label(obj["label"], path, line_no);
        if (!out.emplace(std::move(id), label).second)
            throw SchemaError(fmt::format("{}:{}: duplicate id", path.string(), line_no));
    });
    return out;
}

std::map<std::string, int> read_truth_labels(const fs::path& path, Task task) {
    std::map<std::string, int> out;
    for_each_json_line(path, [&](std::size_t line_no, const json& obj) {
        auto id = id_of(obj, path, line_no);
        int label = 0;
        if (obj.contains("label")) {
            label = binary_label(obj["label"], path, line_no);
        } else if (obj.contains("mbti") && obj["mbti"].is_string()) {
            try {
                label = encode_labels(obj["mbti"].get<std::string>()).get(task);
            } catch (const InvalidLabel& e) {
                throw InvalidLabel(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
            }
        } else {
            throw SchemaError(fmt::format("{}:{}: missing 'label' or 'mbti'", path.string(), line_no));
        }
        if (!out.emplace(std::move(id), label).second)
            throw SchemaError(fmt::format("{}:{}: duplicate id", path.string(), line_no));
    });
    return out;
}

McNemarResult compare_prediction_files(const fs::path& a, const fs::path& b, const fs::path& truth, Task task) {
    const auto pa = read_prediction_labels(a);
    const auto pb = read_prediction_labels(b);
    const auto t = read_truth_labels(truth, task);
    if (t.empty()) throw DataError(fmt::format("'{}' holds no labels", truth.string()));
    std::vector<int> ya, yb, yt;
    for (const auto& [id, label] : t) {
        auto ia = pa.find(id);
        auto ib = pb.find(id);
        if (ia == pa.end()) throw DataError(fmt::format("id '{}' missing from '{}'", id, a.string()));
        if (ib == pb.end()) throw DataError(fmt::format("id '{}' missing from '{}'", id, b.string()));
        ya.push_back(ia->second);
        yb.push_back(ib->second);
        yt.push_back(label);
    }
    return mcnemar_test(ya, yb, yt);
}

json mcnemar_to_json(const McNemarResult& r) {
    return {{"b", r.b},
            {"c", r.c},
            {"statistic", r.statistic},
            {"p_value", r.p_value},
            {"variant", mcnemar_variant_name(r.variant)},
            {"significant", {{"0.05", r.p_value < 0.05}, {"0.005", r.p_value < 0.005}, {"0.001", r.p_value < 0.001}}}};
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Personality prediction benchmark toolkit", "mbti"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(toolkit_version()));

    CommonOptions common;
    std::string artifact, a_path, b_path, truth_path, format = "tsv";
    std::vector<std::string> artifacts, report_inputs;

    auto* stats = app.add_subcommand("stats", "Class distribution of a corpus");
    auto* split = app.add_subcommand("split", "Write the dev/test split and folds");
    auto* train = app.add_subcommand("train", "Fit a model on the whole corpus and save it");
    auto* cv = app.add_subcommand("cv", "10-fold cross-validation");
    auto* predict = app.add_subcommand("predict", "Predict labels with a saved model");
    auto* compare = app.add_subcommand("compare", "McNemar test between two prediction files");
    auto* explain = app.add_subcommand("explain", "Feature weights and highlighted documents");
    auto* report = app.add_subcommand("report", "Merge cross-validation results into one table");
    for (auto* cmd : {stats, split, train, cv, predict, compare, explain, report}) add_common(cmd, common);
    predict->add_option("--artifact", artifact, "Model file written by train");
    compare->add_option("--a", a_path, "Predictions of model A (JSON lines)");
    compare->add_option("--b", b_path, "Predictions of model B (JSON lines)");
    compare->add_option("--truth", truth_path, "Gold labels (JSON lines with label or mbti)");
    explain->add_option("--artifact", artifacts, "Bag-of-words model files (default: train one per task)");
    report->add_option("results", report_inputs, "results.*.json files or directories holding them");
    report->add_option("--format", format, "tsv | md");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << toolkit_version() << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    set_quiet(common.quiet);
    try {
        const RunConfig cfg = build_config(common);
        if (!stats->parsed() && !report->parsed() && !compare->parsed())
            err << fmt::format("seed {}\n", cfg.get_uint("seed"));
        if (stats->parsed()) return cmd_stats(cfg, out);
        if (split->parsed()) return cmd_split(cfg, out);
        if (train->parsed()) return cmd_train(cfg, out);
        if (cv->parsed()) return cmd_cv(cfg, out);
        if (predict->parsed()) return cmd_predict(cfg, artifact, out);
        if (compare->parsed()) return cmd_compare(cfg, a_path, b_path, truth_path, out);
        if (explain->parsed()) return cmd_explain(cfg, artifacts, out);
        if (report->parsed()) return cmd_report(cfg, report_inputs, lower(format), out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

int run_command(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_command(args, std::cout, std::cerr);
}

} // namespace mbti
