#include <fstream>
#include <istream>
#include <ostream>

#include "recf/detail/text_format.hpp"
#include "recf/error.hpp"
#include "recf/io.hpp"

namespace recf::io {
namespace {

using detail::format_double;
using detail::trim;

double to_double(std::string_view key, std::string_view value) {
  const auto v = detail::parse_double(value);
  if (!v) throw ConfigError("'" + std::string(key) + "' expects a number, got '" + std::string(value) + "'");
  return *v;
}

long long to_integer(std::string_view key, std::string_view value) {
  long long out = 0;
  const auto text = trim(value);
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  if (text.empty() || res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw ConfigError("'" + std::string(key) + "' expects an integer, got '" + std::string(value) + "'");
  }
  return out;
}

std::uint64_t to_unsigned(std::string_view key, std::string_view value) {
  const auto v = detail::parse_size(trim(value));
  if (!v) throw ConfigError("'" + std::string(key) + "' expects a non-negative integer, got '" + std::string(value) + "'");
  return *v;
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("'" + std::string(key) + "' expects true or false, got '" + std::string(value) + "'");
}

template <typename T, typename Convert>
std::vector<T> to_list(std::string_view value, Convert convert) {
  std::vector<T> out;
  for (auto piece : detail::split(value, ",")) {
    piece = trim(piece);
    if (!piece.empty()) out.push_back(convert(piece));
  }
  return out;
}

std::filesystem::path to_path(std::string_view value, const std::filesystem::path& base) {
  std::filesystem::path p{std::string(value)};
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, eval::Variant>) {
      out += eval::to_string(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view raw, const std::filesystem::path& base) {
  const auto value = trim(raw);
  // fit
  if (key == "d") fit.d = static_cast<int>(to_integer(key, value));
  else if (key == "lambda_L") fit.lambda_L = to_double(key, value);
  else if (key == "lambda_C" || key == "m") fit.lambda_C_init = to_double(key, value);
  else if (key == "schedule") fit.schedule = model::parse_schedule(value);
  else if (key == "k" || key == "step_k") fit.step_k = to_double(key, value);
  else if (key == "beta") fit.beta = to_double(key, value);
  else if (key == "delta") fit.delta = to_double(key, value);
  else if (key == "gamma_U") fit.gamma_U = to_double(key, value);
  else if (key == "gamma_V") fit.gamma_V = to_double(key, value);
  else if (key == "gamma") fit.gamma_U = fit.gamma_V = to_double(key, value);
  else if (key == "backtracking") fit.backtracking = to_bool(key, value);
  else if (key == "qr_retraction") fit.qr_retraction = to_bool(key, value);
  else if (key == "max_iter") fit.max_iter = static_cast<int>(to_integer(key, value));
  else if (key == "tol") fit.tol = to_double(key, value);
  else if (key == "seed") set_seed(to_unsigned(key, value));
  // skip-gram
  else if (key == "embedding_dim" || key == "e") skipgram.dim = static_cast<int>(to_integer(key, value));
  else if (key == "window") skipgram.window = static_cast<int>(to_integer(key, value));
  else if (key == "epochs") skipgram.epochs = static_cast<int>(to_integer(key, value));
  else if (key == "initial_step") skipgram.initial_step = to_double(key, value);
  else if (key == "linear_decay") skipgram.linear_decay = to_bool(key, value);
  else if (key == "min_count") {
    const auto v = to_integer(key, value);
    if (v < 1) throw ConfigError("min_count must be >= 1");
    min_count = static_cast<std::size_t>(v);
  }
  // data
  else if (key == "ratings") ratings = to_path(value, base);
  else if (key == "labels") labels = to_path(value, base);
  else if (key == "descriptions") descriptions = to_path(value, base);
  else if (key == "corpus") corpus = to_path(value, base);
  else if (key == "embeddings") embeddings = to_path(value, base);
  else if (key == "test") test = to_path(value, base);
  else if (key == "model") model = to_path(value, base);
  else if (key == "output_dir") output_dir = to_path(value, base);
  else if (key == "format") format = parse_format(value);
  else if (key == "scale_min") scale.min = to_double(key, value);
  else if (key == "scale_max") scale.max = to_double(key, value);
  else if (key == "label_threshold") label_threshold = to_double(key, value);
  // sweep
  else if (key == "n_values") {
    n_values = to_list<int>(value, [&](std::string_view p) { return static_cast<int>(to_integer(key, p)); });
  } else if (key == "seeds") {
    seeds = to_list<std::uint64_t>(value, [&](std::string_view p) { return to_unsigned(key, p); });
  } else if (key == "variants") {
    variants = to_list<eval::Variant>(value, [](std::string_view p) { return eval::parse_variant(p); });
  } else if (key == "record_timing") {
    record_timing = to_bool(key, value);
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

void RunConfig::set_seed(std::uint64_t seed) {
  fit.seed = seed;
  skipgram.seed = seed;
}

void RunConfig::validate() const {
  fit.validate();
  skipgram.validate();
  if (!(scale.min <= scale.max)) throw ConfigError("scale_min exceeds scale_max");
  for (int n : n_values) {
    if (n < 3) throw ConfigError("every n in n_values must be >= 3");
  }
  for (const auto* p : {&ratings, &labels, &descriptions, &corpus, &embeddings, &test}) {
    if (!p->empty() && !std::filesystem::exists(*p)) throw ConfigError("path does not exist: " + p->string());
  }
}

eval::SweepConfig RunConfig::sweep_config() const {
  eval::SweepConfig out;
  out.fit = fit;
  out.skipgram = skipgram;
  out.min_count = min_count;
  out.label_threshold = label_threshold;
  out.n_values = n_values;
  out.seeds = seeds;
  out.variants = variants;
  out.record_timing = record_timing;
  out.keep_traces = true;
  return out;
}

RunConfig read_config(std::istream& in, const std::filesystem::path& base_dir, std::string_view source) {
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(view.substr(0, eq));
    try {
      cfg.set(key, view.substr(eq + 1), base_dir);
    } catch (const Error& e) {
      throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return read_config(in, path.parent_path(), path.string());
}

void write_config(std::ostream& out, const RunConfig& c) {
  out << "# fit\n"
      << "d = " << c.fit.d << '\n'
      << "lambda_L = " << format_double(c.fit.lambda_L) << '\n'
      << "lambda_C = " << format_double(c.fit.lambda_C_init) << '\n'
      << "schedule = " << model::to_string(c.fit.schedule) << '\n'
      << "step_k = " << format_double(c.fit.step_k) << '\n'
      << "beta = " << format_double(c.fit.beta) << '\n'
      << "delta = " << format_double(c.fit.delta) << '\n'
      << "gamma_U = " << format_double(c.fit.gamma_U) << '\n'
      << "gamma_V = " << format_double(c.fit.gamma_V) << '\n'
      << "backtracking = " << (c.fit.backtracking ? "true" : "false") << '\n'
      << "qr_retraction = " << (c.fit.qr_retraction ? "true" : "false") << '\n'
      << "max_iter = " << c.fit.max_iter << '\n'
      << "tol = " << format_double(c.fit.tol) << '\n'
      << "seed = " << c.fit.seed << '\n'
      << "# skip-gram\n"
      << "embedding_dim = " << c.skipgram.dim << '\n'
      << "window = " << c.skipgram.window << '\n'
      << "epochs = " << c.skipgram.epochs << '\n'
      << "initial_step = " << format_double(c.skipgram.initial_step) << '\n'
      << "linear_decay = " << (c.skipgram.linear_decay ? "true" : "false") << '\n'
      << "min_count = " << c.min_count << '\n'
      << "# data\n";
  auto path = [&](const char* key, const std::filesystem::path& p) {
    if (!p.empty()) out << key << " = " << p.string() << '\n';
  };
  path("ratings", c.ratings);
  path("labels", c.labels);
  path("descriptions", c.descriptions);
  path("corpus", c.corpus);
  path("embeddings", c.embeddings);
  path("test", c.test);
  path("model", c.model);
  path("output_dir", c.output_dir);
  out << "format = " << to_string(c.format) << '\n'
      << "scale_min = " << format_double(c.scale.min) << '\n'
      << "scale_max = " << format_double(c.scale.max) << '\n'
      << "label_threshold = " << format_double(c.label_threshold) << '\n'
      << "# sweep\n"
      << "n_values = " << join(c.n_values) << '\n'
      << "seeds = " << join(c.seeds) << '\n'
      << "variants = " << join(c.variants) << '\n'
      << "record_timing = " << (c.record_timing ? "true" : "false") << '\n';
}

}  // namespace recf::io
