#include <sstream>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mbti/cli.hpp"
#include "mbti/config.hpp"
#include "mbti/corpus.hpp"
#include "mbti/error.hpp"
#include "mbti/metrics.hpp"

namespace py = pybind11;
using namespace mbti;

namespace {

py::dict metrics_dict(const MetricsReport& m) {
    py::list per_class;
    for (const auto& c : m.per_class) {
        py::dict d;
        d["precision"] = c.precision;
        d["recall"] = c.recall;
        d["f1"] = c.f1;
        d["support"] = c.support;
        per_class.append(d);
    }
    py::dict d;
    d["accuracy"] = m.accuracy;
    d["macro_f1"] = m.macro_f1;
    d["weighted_f1"] = m.weighted_f1;
    d["per_class"] = per_class;
    return d;
}

py::dict mcnemar_dict(const McNemarResult& r) {
    py::dict d;
    d["b"] = r.b;
    d["c"] = r.c;
    d["statistic"] = r.statistic;
    d["p_value"] = r.p_value;
    d["variant"] = std::string(mcnemar_variant_name(r.variant));
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Personality prediction benchmark toolkit";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.def("version", [] { return std::string(toolkit_version()); });

    m.def(
        "encode_labels",
        [](const std::string& mbti) {
            const auto l = encode_labels(mbti);
            return std::vector<int>{l.ei, l.ns, l.tf, l.pj};
        },
        py::arg("mbti"), "Four 0/1 labels in EI, NS, TF, PJ order.");

    m.def(
        "preprocess",
        [](const std::string& text, const std::vector<std::string>& stopwords) {
            return preprocess_text(text, {stopwords.begin(), stopwords.end()});
        },
        py::arg("text"), py::arg("stopwords") = std::vector<std::string>{});

    m.def(
        "class_distribution",
        [](const std::string& jsonl) {
            const auto counts = class_distribution(ingest_corpus_text(jsonl));
            py::dict d;
            for (Task t : kAllTasks) {
                const auto [a, b] = task_letters(t);
                const auto [n0, n1] = counts.pair(t);
                d[py::str(std::string(1, a))] = n0;
                d[py::str(std::string(1, b))] = n1;
            }
            return d;
        },
        py::arg("jsonl"), "Letter counts of a JSON-lines corpus given as text.");

    m.def(
        "compute_metrics",
        [](const std::vector<int>& y_true, const std::vector<int>& y_pred) {
            return metrics_dict(compute_metrics(y_true, y_pred));
        },
        py::arg("y_true"), py::arg("y_pred"));

    m.def(
        "mcnemar",
        [](std::size_t b, std::size_t c) { return mcnemar_dict(mcnemar_from_counts(b, c)); }, py::arg("b"),
        py::arg("c"));
    m.def(
        "mcnemar_test",
        [](const std::vector<int>& a, const std::vector<int>& b, const std::vector<int>& truth) {
            return mcnemar_dict(mcnemar_test(a, b, truth));
        },
        py::arg("preds_a"), py::arg("preds_b"), py::arg("truth"));

    m.def(
        "run",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = run_command(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs a command-line subcommand; returns (exit code, stdout, stderr).");
}
