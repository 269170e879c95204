#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>
#include <tuple>

#include "recf/embeddings.hpp"
#include "recf/error.hpp"
#include "recf/evaluation.hpp"
#include "recf/factor_model.hpp"
#include "recf/io.hpp"
#include "recf/text_corpus.hpp"

namespace py = pybind11;
using namespace recf;
using model::Entry;

namespace {

using Triple = std::tuple<std::uint32_t, std::uint32_t, double>;

std::vector<Entry> to_entries(const std::vector<Triple>& cells) {
  std::vector<Entry> out;
  out.reserve(cells.size());
  for (const auto& [u, v, x] : cells) out.push_back({u, v, x});
  return out;
}

std::vector<Triple> to_triples(const std::vector<Entry>& entries) {
  std::vector<Triple> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.emplace_back(e.user, e.item, e.value);
  return out;
}

template <class T>
std::string to_text(void (*writer)(std::ostream&, const T&), const T& value) {
  std::ostringstream out;
  writer(out, value);
  return out.str();
}

}  // namespace

PYBIND11_MODULE(_recf, m) {
  m.doc() = "Hybrid matrix factorization with word-embedding item descriptions.";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  auto data_error = py::register_exception<DataError>(m, "DataError", error.ptr());
  py::register_exception<ParseError>(m, "ParseError", data_error.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", data_error.ptr());
  py::register_exception<EmptyVocabularyError>(m, "EmptyVocabularyError", data_error.ptr());
  py::register_exception<SingularSystemError>(m, "SingularSystemError", error.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());

  // --- text -----------------------------------------------------------------
  m.def("tokenize", &text::tokenize, py::arg("text"));

  py::class_<text::Vocabulary>(m, "Vocabulary")
      .def_property_readonly("words", &text::Vocabulary::words)
      .def_property_readonly("counts", &text::Vocabulary::counts)
      .def("find", &text::Vocabulary::find, py::arg("token"))
      .def("__len__", &text::Vocabulary::size);
  m.def("build_vocab", &text::build_vocab, py::arg("corpus"), py::arg("min_count") = 1);

  py::class_<text::HuffmanTree>(m, "HuffmanTree")
      .def_readonly("paths", &text::HuffmanTree::paths)
      .def_readonly("codes", &text::HuffmanTree::codes)
      .def("depth", &text::HuffmanTree::depth, py::arg("word"));
  m.def("build_huffman", &text::build_huffman, py::arg("vocab"));

  // --- embeddings -----------------------------------------------------------
  py::class_<embed::SkipgramConfig>(m, "SkipgramConfig")
      .def(py::init<>())
      .def_readwrite("dim", &embed::SkipgramConfig::dim)
      .def_readwrite("window", &embed::SkipgramConfig::window)
      .def_readwrite("epochs", &embed::SkipgramConfig::epochs)
      .def_readwrite("initial_step", &embed::SkipgramConfig::initial_step)
      .def_readwrite("linear_decay", &embed::SkipgramConfig::linear_decay)
      .def_readwrite("seed", &embed::SkipgramConfig::seed);

  py::class_<embed::EmbeddingTable>(m, "EmbeddingTable")
      .def(py::init<>())
      .def_readwrite("word_vectors", &embed::EmbeddingTable::word_vectors)
      .def_readwrite("node_vectors", &embed::EmbeddingTable::node_vectors);

  m.def("train_skipgram", &embed::train_skipgram, py::arg("corpus"), py::arg("vocab"), py::arg("tree"),
        py::arg("config") = embed::SkipgramConfig{});
  m.def("hs_probability",
        py::overload_cast<std::string_view, std::string_view, const text::Vocabulary&, const embed::EmbeddingTable&,
                          const text::HuffmanTree&>(&embed::hs_probability),
        py::arg("center"), py::arg("target"), py::arg("vocab"), py::arg("table"), py::arg("tree"));

  py::class_<embed::DescriptionMatrix>(m, "DescriptionMatrix")
      .def(py::init([](const Eigen::MatrixXd& rows, std::vector<std::uint8_t> present) {
             if (present.size() != static_cast<std::size_t>(rows.rows())) {
               throw DimensionError("one presence flag per row is required");
             }
             return embed::DescriptionMatrix{rows, std::move(present)};
           }),
           py::arg("rows"), py::arg("present"))
      .def_static("empty", &embed::DescriptionMatrix::empty, py::arg("n_items"), py::arg("dim") = 0)
      .def_readonly("rows", &embed::DescriptionMatrix::rows)
      .def_readonly("present", &embed::DescriptionMatrix::present);
  m.def("build_description_matrix", &embed::build_description_matrix, py::arg("descriptions"), py::arg("vocab"),
        py::arg("table"));

  // --- factor model ---------------------------------------------------------
  py::class_<model::SparseRatings>(m, "SparseRatings")
      .def(py::init([](std::size_t n_users, std::size_t n_items, const std::vector<Triple>& cells,
                       std::pair<double, double> scale) {
             model::SparseRatings r{n_users, n_items, to_entries(cells), {scale.first, scale.second}};
             r.validate();
             return r;
           }),
           py::arg("n_users"), py::arg("n_items"), py::arg("entries"), py::arg("scale") = std::pair{1.0, 5.0})
      .def_readonly("n_users", &model::SparseRatings::n_users)
      .def_readonly("n_items", &model::SparseRatings::n_items)
      .def_property_readonly("entries", [](const model::SparseRatings& r) { return to_triples(r.entries); })
      .def("density", &model::SparseRatings::density);

  py::class_<model::SparseLabels>(m, "SparseLabels")
      .def(py::init([](std::size_t n_users, std::size_t n_items, const std::vector<Triple>& cells) {
             model::SparseLabels l{n_users, n_items, to_entries(cells)};
             l.validate();
             return l;
           }),
           py::arg("n_users"), py::arg("n_items"), py::arg("entries"))
      .def_readonly("n_users", &model::SparseLabels::n_users)
      .def_readonly("n_items", &model::SparseLabels::n_items)
      .def_property_readonly("entries", [](const model::SparseLabels& l) { return to_triples(l.entries); });

  py::class_<model::HybridModel>(m, "HybridModel")
      .def(py::init<>())
      .def_readwrite("U", &model::HybridModel::U)
      .def_readwrite("V", &model::HybridModel::V)
      .def_readwrite("B_R", &model::HybridModel::B_R)
      .def_readwrite("B_L", &model::HybridModel::B_L)
      .def_readwrite("W_C", &model::HybridModel::W_C)
      .def_property(
          "scale", [](const model::HybridModel& h) { return std::pair{h.scale.min, h.scale.max}; },
          [](model::HybridModel& h, std::pair<double, double> s) { h.scale = {s.first, s.second}; })
      .def("predict", &model::predict)
      .def("predict_one", &model::predict_one, py::arg("user"), py::arg("item"))
      .def("predict_clamped", &model::predict_clamped, py::arg("user"), py::arg("item"));

  py::enum_<model::LambdaSchedule>(m, "LambdaSchedule")
      .value("linear", model::LambdaSchedule::linear)
      .value("nonlinear", model::LambdaSchedule::nonlinear)
      .value("mutation", model::LambdaSchedule::mutation);
  py::enum_<model::InitSource>(m, "InitSource")
      .value("labels", model::InitSource::labels)
      .value("ratings", model::InitSource::ratings);

  py::class_<model::FitConfig>(m, "FitConfig")
      .def(py::init<>())
      .def_readwrite("d", &model::FitConfig::d)
      .def_readwrite("lambda_L", &model::FitConfig::lambda_L)
      .def_readwrite("lambda_C_init", &model::FitConfig::lambda_C_init)
      .def_readwrite("schedule", &model::FitConfig::schedule)
      .def_readwrite("step_k", &model::FitConfig::step_k)
      .def_readwrite("beta", &model::FitConfig::beta)
      .def_readwrite("delta", &model::FitConfig::delta)
      .def_readwrite("gamma_U", &model::FitConfig::gamma_U)
      .def_readwrite("gamma_V", &model::FitConfig::gamma_V)
      .def_readwrite("backtracking", &model::FitConfig::backtracking)
      .def_readwrite("qr_retraction", &model::FitConfig::qr_retraction)
      .def_readwrite("max_iter", &model::FitConfig::max_iter)
      .def_readwrite("tol", &model::FitConfig::tol)
      .def_readwrite("seed", &model::FitConfig::seed)
      .def_readwrite("init_source", &model::FitConfig::init_source);

  py::class_<model::TraceRecord>(m, "TraceRecord")
      .def_readonly("iter", &model::TraceRecord::iter)
      .def_readonly("lambda_C", &model::TraceRecord::lambda_C)
      .def_readonly("objective", &model::TraceRecord::objective)
      .def_readonly("penalized", &model::TraceRecord::penalized)
      .def_readonly("relative_change", &model::TraceRecord::relative_change)
      .def_readonly("step_failed", &model::TraceRecord::step_failed);

  py::class_<model::FitResult>(m, "FitResult")
      .def_readonly("model", &model::FitResult::model)
      .def_readonly("trace", &model::FitResult::trace)
      .def_readonly("initial_penalized", &model::FitResult::initial_penalized)
      .def_readonly("first_convergence", &model::FitResult::first_convergence)
      .def_readonly("converged", &model::FitResult::converged)
      .def_readonly("init_from_svd", &model::FitResult::init_from_svd);

  m.def("fit", &model::fit, py::arg("ratings"), py::arg("labels"), py::arg("descriptions"),
        py::arg("config") = model::FitConfig{}, py::call_guard<py::gil_scoped_release>());
  m.def("objective", &model::objective, py::arg("model"), py::arg("ratings"), py::arg("labels"),
        py::arg("descriptions"), py::arg("lambda_L"), py::arg("lambda_C"));
  m.def("grad_U", &model::grad_U, py::arg("model"), py::arg("ratings"), py::arg("labels"), py::arg("lambda_L"));
  m.def("grad_V", &model::grad_V, py::arg("model"), py::arg("ratings"), py::arg("labels"), py::arg("descriptions"),
        py::arg("lambda_L"), py::arg("lambda_C"));
  m.def(
      "solve_bridge",
      [](const Eigen::MatrixXd& U, const Eigen::MatrixXd& V, const std::vector<Triple>& observed, double beta) {
        return model::solve_bridge(U, V, to_entries(observed), beta);
      },
      py::arg("U"), py::arg("V"), py::arg("observed"), py::arg("beta"));
  m.def("solve_projection", &model::solve_projection, py::arg("V"), py::arg("descriptions"), py::arg("delta"));

  // --- evaluation -----------------------------------------------------------
  py::enum_<eval::Variant>(m, "Variant")
      .value("recf", eval::Variant::recf)
      .value("no_desc", eval::Variant::no_desc)
      .value("ratings_only", eval::Variant::ratings_only);

  py::class_<eval::EvalSplit>(m, "EvalSplit")
      .def_readonly("train", &eval::EvalSplit::train)
      .def_readonly("labels", &eval::EvalSplit::labels)
      .def_property_readonly("test", [](const eval::EvalSplit& s) { return to_triples(s.test); });
  m.def("split_dataset", &eval::split_dataset, py::arg("ratings"), py::arg("n"), py::arg("seed"),
        py::arg("label_threshold") = 3.0);
  m.def("derive_labels", &eval::derive_labels, py::arg("source"), py::arg("threshold") = 3.0);

  m.def(
      "mae",
      [](const std::vector<double>& pred, const std::vector<Triple>& test) { return eval::mae(pred, to_entries(test)); },
      py::arg("predictions"), py::arg("test"));
  m.def(
      "rmse",
      [](const std::vector<double>& pred, const std::vector<Triple>& test) {
        return eval::rmse(pred, to_entries(test));
      },
      py::arg("predictions"), py::arg("test"));

  py::class_<eval::ErrorMetrics>(m, "ErrorMetrics")
      .def_readonly("mae", &eval::ErrorMetrics::mae)
      .def_readonly("rmse", &eval::ErrorMetrics::rmse)
      .def_readonly("mae_clamped", &eval::ErrorMetrics::mae_clamped)
      .def_readonly("rmse_clamped", &eval::ErrorMetrics::rmse_clamped)
      .def_readonly("count", &eval::ErrorMetrics::count);
  m.def(
      "evaluate",
      [](const model::HybridModel& h, const std::vector<Triple>& test) { return eval::evaluate(h, to_entries(test)); },
      py::arg("model"), py::arg("test"));

  py::class_<eval::RunRecord>(m, "RunRecord")
      .def_readonly("variant", &eval::RunRecord::variant)
      .def_readonly("n", &eval::RunRecord::n)
      .def_readonly("seed", &eval::RunRecord::seed)
      .def_readonly("sparsity", &eval::RunRecord::sparsity)
      .def_readonly("metrics", &eval::RunRecord::metrics)
      .def_readonly("iterations", &eval::RunRecord::iterations)
      .def_readonly("failed", &eval::RunRecord::failed)
      .def_readonly("error", &eval::RunRecord::error)
      .def_readonly("trace", &eval::RunRecord::trace);

  py::class_<eval::AggregateRecord>(m, "AggregateRecord")
      .def_readonly("variant", &eval::AggregateRecord::variant)
      .def_readonly("n", &eval::AggregateRecord::n)
      .def_readonly("sparsity", &eval::AggregateRecord::sparsity)
      .def_readonly("runs", &eval::AggregateRecord::runs)
      .def_readonly("failed", &eval::AggregateRecord::failed)
      .def_readonly("mae_mean", &eval::AggregateRecord::mae_mean)
      .def_readonly("mae_std", &eval::AggregateRecord::mae_std)
      .def_readonly("rmse_mean", &eval::AggregateRecord::rmse_mean)
      .def_readonly("rmse_std", &eval::AggregateRecord::rmse_std);

  py::class_<eval::SweepConfig>(m, "SweepConfig")
      .def(py::init<>())
      .def_readwrite("fit", &eval::SweepConfig::fit)
      .def_readwrite("skipgram", &eval::SweepConfig::skipgram)
      .def_readwrite("min_count", &eval::SweepConfig::min_count)
      .def_readwrite("label_threshold", &eval::SweepConfig::label_threshold)
      .def_readwrite("n_values", &eval::SweepConfig::n_values)
      .def_readwrite("seeds", &eval::SweepConfig::seeds)
      .def_readwrite("variants", &eval::SweepConfig::variants)
      .def_readwrite("record_timing", &eval::SweepConfig::record_timing)
      .def_readwrite("keep_traces", &eval::SweepConfig::keep_traces);

  py::class_<eval::SweepReport>(m, "SweepReport")
      .def_readonly("runs", &eval::SweepReport::runs)
      .def_readonly("aggregates", &eval::SweepReport::aggregates)
      .def("report_csv", [](const eval::SweepReport& r) { return to_text(&eval::write_report_csv, r); })
      .def("plot_data_csv", [](const eval::SweepReport& r) { return to_text(&eval::write_plot_data, r); })
      .def("traces_csv", [](const eval::SweepReport& r) { return to_text(&eval::write_traces, r); });

  m.def(
      "run_sweep",
      [](const model::SparseRatings& ratings, const std::vector<text::TokenList>& descriptions,
         const eval::SweepConfig& cfg) {
        py::gil_scoped_release release;
        return eval::run_sweep(ratings, eval::DescriptionInput{descriptions, {}}, cfg);
      },
      py::arg("ratings"), py::arg("descriptions"), py::arg("config") = eval::SweepConfig{});

  // --- files ----------------------------------------------------------------
  py::class_<io::IdMap>(m, "IdMap")
      .def(py::init<>())
      .def("intern", &io::IdMap::intern, py::arg("raw"))
      .def("find", &io::IdMap::find, py::arg("raw"))
      .def_property_readonly("raws", &io::IdMap::raws)
      .def("__len__", &io::IdMap::size);

  py::class_<io::RatingsFile>(m, "RatingsFile")
      .def_readonly("ratings", &io::RatingsFile::ratings)
      .def_readonly("users", &io::RatingsFile::users)
      .def_readonly("items", &io::RatingsFile::items);
  m.def(
      "load_ratings",
      [](const std::filesystem::path& path, std::string_view format) {
        return io::parse_ratings(path, io::parse_format(format));
      },
      py::arg("path"), py::arg("format") = "double-colon");

  py::class_<io::ModelFile>(m, "ModelFile")
      .def(py::init<>())
      .def_readwrite("model", &io::ModelFile::model)
      .def_readwrite("users", &io::ModelFile::users)
      .def_readwrite("items", &io::ModelFile::items);
  m.def("save_model", &io::save_model, py::arg("path"), py::arg("file"));
  m.def("load_model", &io::load_model, py::arg("path"));
}
