#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "recf/embeddings.hpp"
#include "recf/factor_model.hpp"

namespace recf::eval {

using model::Entry;
using model::SparseLabels;
using model::SparseRatings;

/// One sweep point: ratings to train on, the labels derived from a
/// disjoint subset, and the held-out cells.
struct EvalSplit {
  SparseRatings train;
  SparseRatings label_source;
  SparseLabels labels;
  std::vector<Entry> test;
};

/// Seeded shuffle, then deal into n contiguous near-equal subsets (the
/// first |E| mod n subsets get one extra entry). Subset 0 trains, subset 1
/// becomes labels, the remaining n-2 are held out.
EvalSplit split_dataset(const SparseRatings& ratings, int n, std::uint64_t seed, double label_threshold = 3.0);

/// Like (1) where the score exceeds the threshold, dislike (0) otherwise.
SparseLabels derive_labels(const SparseRatings& source, double threshold = 3.0);

double mae(std::span<const double> predictions, std::span<const Entry> test);
double rmse(std::span<const double> predictions, std::span<const Entry> test);

struct ErrorMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  double mae_clamped = 0.0;
  double rmse_clamped = 0.0;
  std::size_t count = 0;
};

/// Scores every test cell with the model, raw and clamped to its scale.
ErrorMetrics evaluate(const model::HybridModel& model, std::span<const Entry> test);

enum class Variant {
  recf,          // ratings + labels + descriptions
  no_desc,       // lambda_C = 0
  ratings_only,  // lambda_C = lambda_L = 0
};

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

/// Config for the fit that a variant actually runs.
model::FitConfig variant_config(Variant v, const model::FitConfig& base);

struct RunRecord {
  Variant variant = Variant::recf;
  int n = 0;
  std::uint64_t seed = 0;
  double sparsity = 0.0;
  ErrorMetrics metrics;
  int iterations = 0;
  double seconds = 0.0;
  bool failed = false;
  std::string error;
  std::vector<model::TraceRecord> trace;
};

struct SweepConfig {
  model::FitConfig fit;
  embed::SkipgramConfig skipgram;
  std::size_t min_count = 1;
  double label_threshold = 3.0;
  std::vector<int> n_values{3, 5, 10, 15, 20};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<Variant> variants{Variant::recf, Variant::no_desc, Variant::ratings_only};
  /// Fill the seconds column with wall-clock time (it reads 0 otherwise).
  bool record_timing = false;
  /// Keep per-run iteration traces in the report.
  bool keep_traces = false;
  /// Called after every finished cell, in sweep order.
  std::function<void(const RunRecord&)> on_run;
};

struct AggregateRecord {
  Variant variant = Variant::recf;
  int n = 0;
  double sparsity = 0.0;  // mean over runs
  std::size_t runs = 0;
  std::size_t failed = 0;
  double mae_mean = 0.0, mae_std = 0.0;
  double rmse_mean = 0.0, rmse_std = 0.0;
  double mae_clamped_mean = 0.0, rmse_clamped_mean = 0.0;
};

struct SweepReport {
  std::vector<RunRecord> runs;
  std::vector<AggregateRecord> aggregates;

  const AggregateRecord* find(Variant v, int n) const;
};

/// Everything a sweep needs about item descriptions: the per-item token
/// lists and the corpus the word vectors are trained on.
struct DescriptionInput {
  std::vector<text::TokenList> items;  // one per item, may be empty
  text::Corpus corpus;                 // defaults to the item lists themselves
};

/// Word vectors are trained once per call (they depend only on the
/// descriptions); every (n, seed, variant) cell then splits, derives
/// labels, fits and evaluates. A cell that throws is recorded as failed.
SweepReport run_sweep(const SparseRatings& ratings, const DescriptionInput& descriptions, const SweepConfig& cfg);

/// Same, with a description matrix built elsewhere.
SweepReport run_sweep(const SparseRatings& ratings, const embed::DescriptionMatrix& descriptions,
                      const SweepConfig& cfg);

/// Per-(variant, n) mean and sample std over successful runs.
std::vector<AggregateRecord> aggregate(const std::vector<RunRecord>& runs);

/// Per-run CSV lines, a blank line, then a "# aggregate" block.
void write_report_csv(std::ostream& out, const SweepReport& report);
/// Aggregate table only, one row per (variant, n), for plotting.
void write_plot_data(std::ostream& out, const SweepReport& report);
/// variant,n,seed,iter,lambda_c,objective,penalized rows for every kept trace.
void write_traces(std::ostream& out, const SweepReport& report);

}  // namespace recf::eval
