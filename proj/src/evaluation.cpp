#include "recf/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include "recf/detail/text_format.hpp"
#include "recf/error.hpp"
#include "recf/random.hpp"

namespace recf::eval {
namespace {

using detail::format_double;

void check_pairing(std::span<const double> predictions, std::span<const Entry> test) {
  if (test.empty()) throw DataError("metric needs a non-empty test set");
  if (predictions.size() != test.size()) throw DimensionError("one prediction per test cell is required");
}

SparseRatings subset_like(const SparseRatings& ratings) {
  SparseRatings out;
  out.n_users = ratings.n_users;
  out.n_items = ratings.n_items;
  out.scale = ratings.scale;
  return out;
}

double mean_of(const std::vector<double>& xs) {
  return xs.empty() ? std::numeric_limits<double>::quiet_NaN()
                    : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Sample standard deviation; zero for fewer than two values.
double std_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

RunRecord run_cell(const EvalSplit& split, const embed::DescriptionMatrix& descriptions, Variant variant, int n,
                   std::uint64_t seed, const SweepConfig& cfg) {
  RunRecord rec;
  rec.variant = variant;
  rec.n = n;
  rec.seed = seed;
  rec.sparsity = split.train.density();
  const auto start = std::chrono::steady_clock::now();
  try {
    auto fit_cfg = variant_config(variant, cfg.fit);
    fit_cfg.seed = seed;
    const SparseLabels no_labels{split.labels.n_users, split.labels.n_items, {}};
    const auto& labels = variant == Variant::ratings_only ? no_labels : split.labels;
    const auto no_desc = embed::DescriptionMatrix::empty(descriptions.n_items(), descriptions.dim());
    const auto& desc = variant == Variant::recf ? descriptions : no_desc;
    auto result = model::fit(split.train, labels, desc, fit_cfg);
    rec.metrics = evaluate(result.model, split.test);
    rec.iterations = result.iterations();
    if (cfg.keep_traces) rec.trace = std::move(result.trace);
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rec.metrics = {nan, nan, nan, nan, 0};
  }
  if (cfg.record_timing) {
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return rec;
}

}  // namespace

EvalSplit split_dataset(const SparseRatings& ratings, int n, std::uint64_t seed, double label_threshold) {
  if (n < 3) throw ConfigError("split needs n >= 3");
  if (ratings.entries.size() < static_cast<std::size_t>(n)) {
    throw DataError("cannot split " + std::to_string(ratings.entries.size()) + " entries into " + std::to_string(n) +
                    " subsets");
  }
  std::vector<Entry> shuffled = ratings.entries;
  Rng rng(seed);
  shuffle(std::span<Entry>(shuffled), rng);

  const std::size_t total = shuffled.size();
  const std::size_t base = total / static_cast<std::size_t>(n);
  const std::size_t extra = total % static_cast<std::size_t>(n);
  auto subset_size = [&](std::size_t k) { return base + (k < extra ? 1 : 0); };

  EvalSplit split;
  split.train = subset_like(ratings);
  split.label_source = subset_like(ratings);
  std::size_t pos = 0;
  for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k) {
    const std::size_t size = subset_size(k);
    auto first = shuffled.begin() + static_cast<std::ptrdiff_t>(pos);
    auto last = first + static_cast<std::ptrdiff_t>(size);
    if (k == 0) {
      split.train.entries.assign(first, last);
    } else if (k == 1) {
      split.label_source.entries.assign(first, last);
    } else {
      split.test.insert(split.test.end(), first, last);
    }
    pos += size;
  }
  split.labels = derive_labels(split.label_source, label_threshold);
  return split;
}

SparseLabels derive_labels(const SparseRatings& source, double threshold) {
  SparseLabels labels{source.n_users, source.n_items, {}};
  labels.entries.reserve(source.entries.size());
  for (const auto& e : source.entries) labels.entries.push_back({e.user, e.item, e.value > threshold ? 1.0 : 0.0});
  return labels;
}

double mae(std::span<const double> predictions, std::span<const Entry> test) {
  check_pairing(predictions, test);
  double total = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) total += std::abs(test[i].value - predictions[i]);
  return total / static_cast<double>(test.size());
}

double rmse(std::span<const double> predictions, std::span<const Entry> test) {
  check_pairing(predictions, test);
  double total = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const double r = test[i].value - predictions[i];
    total += r * r;
  }
  return std::sqrt(total / static_cast<double>(test.size()));
}

ErrorMetrics evaluate(const model::HybridModel& model, std::span<const Entry> test) {
  std::vector<double> raw;
  std::vector<double> clamped;
  raw.reserve(test.size());
  clamped.reserve(test.size());
  for (const auto& e : test) {
    const double p = model::predict_one(model, e.user, e.item);
    raw.push_back(p);
    clamped.push_back(model.scale.clamp(p));
  }
  return {mae(raw, test), rmse(raw, test), mae(clamped, test), rmse(clamped, test), test.size()};
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::recf: return "RECF";
    case Variant::no_desc: return "NO-DESC";
    case Variant::ratings_only: return "RATINGS-ONLY";
  }
  return "RECF";
}

Variant parse_variant(std::string_view name) {
  std::string upper(name);
  for (auto& c : upper) {
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (c == '_') c = '-';
  }
  if (upper == "RECF") return Variant::recf;
  if (upper == "NO-DESC") return Variant::no_desc;
  if (upper == "RATINGS-ONLY") return Variant::ratings_only;
  throw ConfigError("unknown variant '" + std::string(name) + "'");
}

model::FitConfig variant_config(Variant v, const model::FitConfig& base) {
  auto cfg = base;
  switch (v) {
    case Variant::recf:
      break;
    case Variant::no_desc:
      cfg.lambda_C_init = 0.0;
      break;
    case Variant::ratings_only:
      cfg.lambda_C_init = 0.0;
      cfg.lambda_L = 0.0;
      cfg.init_source = model::InitSource::ratings;
      break;
  }
  return cfg;
}

const AggregateRecord* SweepReport::find(Variant v, int n) const {
  for (const auto& a : aggregates) {
    if (a.variant == v && a.n == n) return &a;
  }
  return nullptr;
}

SweepReport run_sweep(const SparseRatings& ratings, const DescriptionInput& descriptions, const SweepConfig& cfg) {
  if (descriptions.items.size() != ratings.n_items) {
    throw DimensionError("need one description entry per item (" + std::to_string(ratings.n_items) + ")");
  }
  const auto& corpus = descriptions.corpus.empty() ? descriptions.items : descriptions.corpus;
  embed::DescriptionMatrix matrix = embed::DescriptionMatrix::empty(static_cast<Eigen::Index>(ratings.n_items));
  try {
    const auto vocab = text::build_vocab(corpus, cfg.min_count);
    const auto tree = text::build_huffman(vocab);
    const auto table = embed::train_skipgram(corpus, vocab, tree, cfg.skipgram);
    matrix = embed::build_description_matrix(descriptions.items, vocab, table);
  } catch (const EmptyVocabularyError&) {
    // No usable text: every variant degrades to its description-free form.
  }
  return run_sweep(ratings, matrix, cfg);
}

SweepReport run_sweep(const SparseRatings& ratings, const embed::DescriptionMatrix& descriptions,
                      const SweepConfig& cfg) {
  ratings.validate();
  cfg.fit.validate();
  if (static_cast<std::size_t>(descriptions.n_items()) != ratings.n_items) {
    throw DimensionError("description matrix does not cover every item");
  }
  SweepReport report;
  for (int n : cfg.n_values) {
    for (auto seed : cfg.seeds) {
      const auto split = split_dataset(ratings, n, seed, cfg.label_threshold);
      for (auto variant : cfg.variants) {
        report.runs.push_back(run_cell(split, descriptions, variant, n, seed, cfg));
        if (cfg.on_run) cfg.on_run(report.runs.back());
      }
    }
  }
  report.aggregates = aggregate(report.runs);
  return report;
}

std::vector<AggregateRecord> aggregate(const std::vector<RunRecord>& runs) {
  struct Acc {
    std::vector<double> mae, rmse, mae_c, rmse_c, sparsity;
    std::size_t failed = 0;
  };
  // Keyed by first appearance so the output follows the sweep order.
  std::vector<std::pair<Variant, int>> order;
  std::map<std::pair<int, int>, Acc> acc;
  for (const auto& r : runs) {
    const std::pair<int, int> key{static_cast<int>(r.variant), r.n};
    if (!acc.contains(key)) order.emplace_back(r.variant, r.n);
    auto& a = acc[key];
    a.sparsity.push_back(r.sparsity);
    if (r.failed) {
      ++a.failed;
      continue;
    }
    a.mae.push_back(r.metrics.mae);
    a.rmse.push_back(r.metrics.rmse);
    a.mae_c.push_back(r.metrics.mae_clamped);
    a.rmse_c.push_back(r.metrics.rmse_clamped);
  }
  std::vector<AggregateRecord> out;
  for (const auto& [variant, n] : order) {
    const auto& a = acc.at({static_cast<int>(variant), n});
    AggregateRecord rec;
    rec.variant = variant;
    rec.n = n;
    rec.sparsity = mean_of(a.sparsity);
    rec.runs = a.mae.size();
    rec.failed = a.failed;
    rec.mae_mean = mean_of(a.mae);
    rec.mae_std = std_of(a.mae);
    rec.rmse_mean = mean_of(a.rmse);
    rec.rmse_std = std_of(a.rmse);
    rec.mae_clamped_mean = mean_of(a.mae_c);
    rec.rmse_clamped_mean = mean_of(a.rmse_c);
    out.push_back(rec);
  }
  return out;
}

void write_report_csv(std::ostream& out, const SweepReport& report) {
  out << "variant,n,sparsity,seed,mae,rmse,mae_clamped,rmse_clamped,iters,seconds\n";
  for (const auto& r : report.runs) {
    out << to_string(r.variant) << ',' << r.n << ',' << format_double(r.sparsity) << ',' << r.seed << ','
        << format_double(r.metrics.mae) << ',' << format_double(r.metrics.rmse) << ','
        << format_double(r.metrics.mae_clamped) << ',' << format_double(r.metrics.rmse_clamped) << ','
        << r.iterations << ',' << format_double(r.seconds) << '\n';
  }
  out << "\n# aggregate\n";
  write_plot_data(out, report);
}

void write_plot_data(std::ostream& out, const SweepReport& report) {
  out << "variant,n,sparsity,runs,failed,mae_mean,mae_std,rmse_mean,rmse_std,mae_clamped_mean,rmse_clamped_mean\n";
  for (const auto& a : report.aggregates) {
    out << to_string(a.variant) << ',' << a.n << ',' << format_double(a.sparsity) << ',' << a.runs << ','
        << a.failed << ',' << format_double(a.mae_mean) << ',' << format_double(a.mae_std) << ','
        << format_double(a.rmse_mean) << ',' << format_double(a.rmse_std) << ','
        << format_double(a.mae_clamped_mean) << ',' << format_double(a.rmse_clamped_mean) << '\n';
  }
}

void write_traces(std::ostream& out, const SweepReport& report) {
  out << "variant,n,seed,iter,lambda_c,objective,penalized\n";
  for (const auto& r : report.runs) {
    for (const auto& t : r.trace) {
      out << to_string(r.variant) << ',' << r.n << ',' << r.seed << ',' << t.iter << ','
          << format_double(t.lambda_C) << ',' << format_double(t.objective) << ',' << format_double(t.penalized)
          << '\n';
    }
  }
}

}  // namespace recf::eval
