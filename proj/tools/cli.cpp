#include "cli.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "recf/detail/text_format.hpp"
#include "recf/embeddings.hpp"
#include "recf/error.hpp"
#include "recf/evaluation.hpp"
#include "recf/factor_model.hpp"
#include "recf/io.hpp"
#include "recf/text_corpus.hpp"

namespace recf::cli {
namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string format;
  std::vector<std::string> overrides;
  bool quiet = false;
};

class Console {
 public:
  Console(std::ostream& err, bool quiet) : err_(err), quiet_(quiet) {}
  void progress(const std::string& line) const {
    if (!quiet_) err_ << line << '\n';
  }
  void warn(const std::string& line) const { err_ << "warning: " << line << '\n'; }

 private:
  std::ostream& err_;
  bool quiet_;
};

/// Config file, then RECF_SEED, then flags.
io::RunConfig resolve_config(const Common& c) {
  io::RunConfig cfg = c.config.empty() ? io::RunConfig{} : io::load_config(c.config);
  if (const char* env = std::getenv("RECF_SEED"); env && *env) {
    const auto seed = detail::parse_size(env);
    if (!seed) throw ConfigError("RECF_SEED must be a non-negative integer, got '" + std::string(env) + "'");
    cfg.set_seed(*seed);
  }
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(detail::trim(std::string_view(kv).substr(0, eq)), std::string_view(kv).substr(eq + 1));
  }
  if (c.seed) cfg.set_seed(*c.seed);
  if (!c.format.empty()) cfg.format = io::parse_format(c.format);
  return cfg;
}

void set_path(fs::path& slot, const std::string& flag) {
  if (!flag.empty()) slot = flag;
}

std::string shortest(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

text::Corpus read_corpus_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus " + path.string());
  return text::read_corpus(in);
}

/// Drops a description path that does not exist, with a warning.
void drop_missing_descriptions(io::RunConfig& cfg, const Console& console) {
  if (!cfg.descriptions.empty() && !fs::exists(cfg.descriptions)) {
    console.warn("description file " + cfg.descriptions.string() +
                 " not found; continuing without descriptions (every z_v = 0)");
    cfg.descriptions.clear();
  }
}

struct Dataset {
  io::RatingsFile ratings;
  model::SparseLabels labels;
  embed::DescriptionMatrix descriptions;
};

embed::DescriptionMatrix description_matrix(const io::RunConfig& cfg, const io::IdMap& items, const Console& console) {
  const auto n_items = static_cast<Eigen::Index>(items.size());
  if (cfg.descriptions.empty()) return embed::DescriptionMatrix::empty(n_items);
  const auto file = io::parse_descriptions(cfg.descriptions, cfg.format, items);
  if (file.unmatched > 0) console.progress(std::to_string(file.unmatched) + " description lines name unknown items");
  if (!cfg.embeddings.empty()) {
    const auto bundle = embed::load_embeddings(cfg.embeddings);
    return embed::build_description_matrix(file.items, bundle.vocab, bundle.table);
  }
  const auto corpus = cfg.corpus.empty() ? file.corpus : read_corpus_file(cfg.corpus);
  try {
    const auto vocab = text::build_vocab(corpus, cfg.min_count);
    const auto tree = text::build_huffman(vocab);
    console.progress("training word vectors: " + std::to_string(vocab.size()) + " words");
    const auto table = embed::train_skipgram(corpus, vocab, tree, cfg.skipgram);
    return embed::build_description_matrix(file.items, vocab, table);
  } catch (const EmptyVocabularyError&) {
    console.warn("descriptions contain no usable words; continuing without them");
    return embed::DescriptionMatrix::empty(n_items);
  }
}

Dataset load_training_data(const io::RunConfig& cfg, const Console& console) {
  if (cfg.ratings.empty()) throw ConfigError("no ratings file (set --ratings or 'ratings' in the config)");
  Dataset ds;
  ds.ratings = io::parse_ratings(cfg.ratings, cfg.format, cfg.scale);
  if (!cfg.labels.empty()) {
    std::ifstream in(cfg.labels);
    if (!in) throw DataError("cannot open labels " + cfg.labels.string());
    ds.labels = io::read_labels(in, cfg.format, ds.ratings.users, ds.ratings.items, cfg.labels.string());
    // Labels may name users or items without ratings; both grids cover the union.
    ds.ratings.ratings.n_users = ds.labels.n_users = ds.ratings.users.size();
    ds.ratings.ratings.n_items = ds.labels.n_items = ds.ratings.items.size();
  } else {
    ds.labels = eval::derive_labels(ds.ratings.ratings, cfg.label_threshold);
  }
  ds.descriptions = description_matrix(cfg, ds.ratings.items, console);
  return ds;
}

int cmd_embed(const io::RunConfig& cfg, const Console& console) {
  text::Corpus corpus;
  if (!cfg.corpus.empty()) {
    corpus = read_corpus_file(cfg.corpus);
  } else if (!cfg.descriptions.empty()) {
    corpus = io::parse_descriptions(cfg.descriptions, cfg.format, io::IdMap{}).corpus;
  } else {
    throw ConfigError("embed needs --corpus or --descriptions");
  }
  if (cfg.embeddings.empty()) throw ConfigError("embed needs --out (or 'embeddings' in the config)");
  const auto vocab = text::build_vocab(corpus, cfg.min_count);
  const auto tree = text::build_huffman(vocab);
  console.progress("vocabulary: " + std::to_string(vocab.size()) + " words, " + std::to_string(vocab.total_count()) +
                   " tokens");
  const auto table = embed::train_skipgram(corpus, vocab, tree, cfg.skipgram);
  embed::save_embeddings(cfg.embeddings, vocab, table);
  console.progress("wrote " + cfg.embeddings.string());
  return kOk;
}

int cmd_train(io::RunConfig cfg, const Console& console) {
  drop_missing_descriptions(cfg, console);
  cfg.validate();
  if (cfg.model.empty()) throw ConfigError("train needs --model (or 'model' in the config)");
  const auto ds = load_training_data(cfg, console);
  console.progress("fitting " + std::to_string(ds.ratings.ratings.n_users) + " users x " +
                   std::to_string(ds.ratings.ratings.n_items) + " items, " +
                   std::to_string(ds.ratings.ratings.entries.size()) + " ratings, " +
                   std::to_string(ds.descriptions.present_count()) + " described items");
  const auto result = model::fit(ds.ratings.ratings, ds.labels, ds.descriptions, cfg.fit);
  const auto& last = result.trace.back();
  console.progress("iterations " + std::to_string(result.iterations()) + ", objective " + shortest(last.objective) +
                   (result.converged ? ", converged" : ", stopped at max_iter"));
  io::save_model(cfg.model, {result.model, ds.ratings.users, ds.ratings.items});
  console.progress("wrote " + cfg.model.string());
  return kOk;
}

std::size_t lookup(const io::IdMap& map, const std::string& raw, const char* what) {
  const auto id = map.find(raw);
  if (!id) throw DataError(std::string("unknown ") + what + " '" + raw + "'");
  return *id;
}

int cmd_predict(const io::RunConfig& cfg, const std::string& user, const std::string& item,
                const std::string& queries, bool raw, std::ostream& out) {
  if (cfg.model.empty()) throw ConfigError("predict needs --model");
  const auto file = io::load_model(cfg.model);
  auto score = [&](const std::string& u, const std::string& v) {
    const auto uid = lookup(file.users, u, "user");
    const auto vid = lookup(file.items, v, "item");
    return raw ? model::predict_one(file.model, uid, vid) : model::predict_clamped(file.model, uid, vid);
  };
  if (!queries.empty()) {
    std::ifstream in(queries);
    if (!in) throw DataError("cannot open queries " + queries);
    const auto sep = io::separator(cfg.format);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (detail::trim(line).empty()) continue;
      const auto fields = detail::split(line, sep);
      if (fields.size() < 2) throw ParseError(queries, line_no, "expected user" + std::string(sep) + "item");
      const std::string u(detail::trim(fields[0])), v(detail::trim(fields[1]));
      out << u << sep << v << sep << shortest(score(u, v)) << '\n';
    }
    return kOk;
  }
  if (user.empty() || item.empty()) throw ConfigError("predict needs --user and --item, or --queries");
  out << shortest(score(user, item)) << '\n';
  return kOk;
}

int cmd_evaluate(const io::RunConfig& cfg, const Console& console, std::ostream& out) {
  if (cfg.model.empty()) throw ConfigError("evaluate needs --model");
  if (cfg.test.empty()) throw ConfigError("evaluate needs --test");
  const auto file = io::load_model(cfg.model);
  std::ifstream in(cfg.test);
  if (!in) throw DataError("cannot open test file " + cfg.test.string());
  const auto held = io::read_test(in, cfg.format, file.users, file.items, cfg.test.string());
  if (held.skipped > 0) console.warn(std::to_string(held.skipped) + " test lines name unknown users or items");
  const auto m = eval::evaluate(file.model, held.entries);
  out << "count " << m.count << '\n'
      << "mae " << detail::format_double(m.mae) << '\n'
      << "rmse " << detail::format_double(m.rmse) << '\n'
      << "mae_clamped " << detail::format_double(m.mae_clamped) << '\n'
      << "rmse_clamped " << detail::format_double(m.rmse_clamped) << '\n';
  return kOk;
}

int cmd_sweep(io::RunConfig cfg, const Console& console) {
  drop_missing_descriptions(cfg, console);
  cfg.validate();
  if (cfg.ratings.empty()) throw ConfigError("sweep needs 'ratings' in the config");
  const auto ratings = io::parse_ratings(cfg.ratings, cfg.format, cfg.scale);
  const auto matrix = description_matrix(cfg, ratings.items, console);

  auto sweep = cfg.sweep_config();
  sweep.on_run = [&](const eval::RunRecord& r) {
    std::string line = std::string(eval::to_string(r.variant)) + " n=" + std::to_string(r.n) +
                       " seed=" + std::to_string(r.seed);
    line += r.failed ? " failed: " + r.error : " mae=" + shortest(r.metrics.mae) + " iters=" + std::to_string(r.iterations);
    console.progress(line);
  };
  const auto report = eval::run_sweep(ratings.ratings, matrix, sweep);

  fs::create_directories(cfg.output_dir);
  const auto report_path = cfg.output_dir / "report.csv";
  detail::write_atomically(report_path, [&](std::ostream& o) { eval::write_report_csv(o, report); });
  detail::write_atomically(cfg.output_dir / "plot_data.csv", [&](std::ostream& o) { eval::write_plot_data(o, report); });
  detail::write_atomically(cfg.output_dir / "traces.csv", [&](std::ostream& o) { eval::write_traces(o, report); });
  console.progress("wrote " + report_path.string());
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hybrid recommender: ratings, like/dislike labels and item descriptions", "recf"};
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("--config", common.config, "key = value config file");
  app.add_option("--seed", common.seed, "random seed (overrides RECF_SEED and the config)");
  app.add_option("--format", common.format, "rating file format: double-colon, tab or comma");
  app.add_option("--set", common.overrides, "override one config key, as key=value")->take_all();
  app.add_flag("--quiet,-q", common.quiet, "no progress lines on stderr");

  struct Paths {
    std::string ratings, labels, descriptions, corpus, embeddings, model, test, out;
  } paths;

  auto* embed = app.add_subcommand("embed", "train word vectors on a corpus");
  embed->add_option("--corpus", paths.corpus, "text corpus, one sentence per line");
  embed->add_option("--descriptions", paths.descriptions, "item description file used as the corpus");
  embed->add_option("--out,-o", paths.embeddings, "output vector file (.nodes and .vocab are written next to it)");

  auto* train = app.add_subcommand("train", "fit a model and write it to a file");
  train->add_option("--ratings", paths.ratings, "ratings file");
  train->add_option("--labels", paths.labels, "like/dislike file (default: derived from the ratings)");
  train->add_option("--descriptions", paths.descriptions, "item description file");
  train->add_option("--corpus", paths.corpus, "corpus for the word vectors (default: the descriptions)");
  train->add_option("--embeddings", paths.embeddings, "pretrained vector file from 'embed'");
  train->add_option("--model,-o", paths.model, "output model file");

  std::string user, item, queries;
  bool raw = false;
  auto* predict = app.add_subcommand("predict", "score user/item pairs");
  predict->add_option("--model,-m", paths.model, "model file");
  predict->add_option("--user", user, "raw user id");
  predict->add_option("--item", item, "raw item id");
  predict->add_option("--queries", queries, "file of user<sep>item lines");
  predict->add_flag("--raw", raw, "print the unclamped score");

  auto* evaluate = app.add_subcommand("evaluate", "MAE and RMSE of a model on held-out ratings");
  evaluate->add_option("--model,-m", paths.model, "model file");
  evaluate->add_option("--test", paths.test, "held-out ratings file");

  auto* sweep = app.add_subcommand("sweep", "sparsity sweep over n-way splits, seeds and variants");
  sweep->add_option("--out-dir", paths.out, "directory for report.csv, plot_data.csv and traces.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  const Console console(err, common.quiet);
  try {
    io::RunConfig cfg = resolve_config(common);
    set_path(cfg.ratings, paths.ratings);
    set_path(cfg.labels, paths.labels);
    set_path(cfg.descriptions, paths.descriptions);
    set_path(cfg.corpus, paths.corpus);
    set_path(cfg.embeddings, paths.embeddings);
    set_path(cfg.model, paths.model);
    set_path(cfg.test, paths.test);
    set_path(cfg.output_dir, paths.out);

    if (embed->parsed()) return cmd_embed(cfg, console);
    if (train->parsed()) return cmd_train(cfg, console);
    if (predict->parsed()) return cmd_predict(cfg, user, item, queries, raw, out);
    if (evaluate->parsed()) return cmd_evaluate(cfg, console, out);
    if (sweep->parsed()) return cmd_sweep(cfg, console);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

}  // namespace recf::cli
