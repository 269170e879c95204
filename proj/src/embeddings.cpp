#include "recf/embeddings.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "recf/detail/text_format.hpp"
#include "recf/error.hpp"
#include "recf/random.hpp"

namespace recf::embed {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(sigmoid(x)) without overflow for large |x|.
double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

// Designated child (code 0) scores +<node, center>, the other child the negation.
double branch_sign(std::uint8_t code) { return code == 0 ? 1.0 : -1.0; }

void check_shapes(const EmbeddingTable& table, const text::HuffmanTree& tree) {
  if (static_cast<std::size_t>(table.n_words()) != tree.n_words ||
      static_cast<std::size_t>(table.node_vectors.rows()) != tree.inner_node_count() ||
      table.node_vectors.cols() != table.word_vectors.cols()) {
    throw DimensionError("embedding table does not match the Huffman tree");
  }
}

std::vector<std::vector<std::size_t>> to_ids(const text::Corpus& corpus, const text::Vocabulary& vocab) {
  std::vector<std::vector<std::size_t>> lines;
  lines.reserve(corpus.size());
  for (const auto& line : corpus) {
    std::vector<std::size_t> ids;
    ids.reserve(line.size());
    for (const auto& token : line) {
      if (auto id = vocab.find(token)) ids.push_back(*id);
    }
    lines.push_back(std::move(ids));
  }
  return lines;
}

double log_probability(std::size_t center, std::size_t target, const EmbeddingTable& table,
                       const text::HuffmanTree& tree) {
  const auto& path = tree.paths[target];
  const auto& code = tree.codes[target];
  double total = 0.0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const double x = table.node_vectors.row(path[i]).dot(table.word_vectors.row(center));
    total += log_sigmoid(branch_sign(code[i]) * x);
  }
  return total;
}

template <typename Visit>
void for_each_pair(const std::vector<std::size_t>& line, int window, Visit&& visit) {
  const auto n = static_cast<std::ptrdiff_t>(line.size());
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const auto lo = std::max<std::ptrdiff_t>(0, t - window);
    const auto hi = std::min<std::ptrdiff_t>(n - 1, t + window);
    for (auto s = lo; s <= hi; ++s) {
      if (s != t) visit(line[t], line[s]);
    }
  }
}

}  // namespace

void SkipgramConfig::validate() const {
  if (dim < 1) throw ConfigError("embedding dim must be >= 1");
  if (window < 1) throw ConfigError("window must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(initial_step > 0.0)) throw ConfigError("initial_step must be > 0");
}

double hs_probability(std::size_t center, std::size_t target, const EmbeddingTable& table,
                      const text::HuffmanTree& tree) {
  check_shapes(table, tree);
  if (center >= tree.n_words || target >= tree.n_words) throw DataError("word id outside the vocabulary");
  const auto& path = tree.paths[target];
  const auto& code = tree.codes[target];
  double p = 1.0;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const double x = table.node_vectors.row(path[i]).dot(table.word_vectors.row(center));
    p *= sigmoid(branch_sign(code[i]) * x);
  }
  return p;
}

double hs_probability(std::string_view center, std::string_view target, const text::Vocabulary& vocab,
                      const EmbeddingTable& table, const text::HuffmanTree& tree) {
  return hs_probability(vocab.id(center), vocab.id(target), table, tree);
}

double average_log_probability(const text::Corpus& corpus, const text::Vocabulary& vocab,
                               const EmbeddingTable& table, const text::HuffmanTree& tree, int window) {
  check_shapes(table, tree);
  const auto lines = to_ids(corpus, vocab);
  double total = 0.0;
  std::size_t positions = 0;
  for (const auto& line : lines) {
    positions += line.size();
    for_each_pair(line, window, [&](std::size_t center, std::size_t target) {
      total += log_probability(center, target, table, tree);
    });
  }
  if (positions == 0) throw DataError("corpus has no in-vocabulary tokens");
  return total / static_cast<double>(positions);
}

EmbeddingTable train_skipgram(const text::Corpus& corpus, const text::Vocabulary& vocab,
                              const text::HuffmanTree& tree, const SkipgramConfig& cfg) {
  cfg.validate();
  if (vocab.empty() || tree.n_words != vocab.size()) throw DimensionError("Huffman tree does not match vocabulary");
  const auto lines = to_ids(corpus, vocab);
  std::uint64_t tokens = 0;
  for (const auto& line : lines) tokens += line.size();
  if (tokens == 0) throw DataError("training corpus has no in-vocabulary tokens");

  const auto k = static_cast<Eigen::Index>(vocab.size());
  const Eigen::Index e = cfg.dim;
  EmbeddingTable table;
  table.word_vectors.resize(k, e);
  table.node_vectors = Matrix::Zero(static_cast<Eigen::Index>(tree.inner_node_count()), e);

  Rng rng(cfg.seed);
  const double half_width = 0.5 / static_cast<double>(e);
  for (Eigen::Index w = 0; w < k; ++w) {
    for (Eigen::Index j = 0; j < e; ++j) table.word_vectors(w, j) = uniform(rng, -half_width, half_width);
  }

  const double total_positions = static_cast<double>(tokens) * cfg.epochs;
  const double floor_step = cfg.initial_step * 0.025;
  std::uint64_t processed = 0;
  Vector center_grad(e);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& line : lines) {
      const auto n = static_cast<std::ptrdiff_t>(line.size());
      for (std::ptrdiff_t t = 0; t < n; ++t, ++processed) {
        double step = cfg.initial_step;
        if (cfg.linear_decay) {
          step = std::max(floor_step, cfg.initial_step * (1.0 - static_cast<double>(processed) / total_positions));
        }
        const std::size_t center = line[t];
        const auto lo = std::max<std::ptrdiff_t>(0, t - cfg.window);
        const auto hi = std::min<std::ptrdiff_t>(n - 1, t + cfg.window);
        for (auto s = lo; s <= hi; ++s) {
          if (s == t) continue;
          const std::size_t target = line[s];
          const auto& path = tree.paths[target];
          const auto& code = tree.codes[target];
          center_grad.setZero();
          for (std::size_t i = 0; i < path.size(); ++i) {
            auto node = table.node_vectors.row(path[i]);
            const double f = sigmoid(node.dot(table.word_vectors.row(center)));
            // d/dx log sigmoid(sign * x) = (1 - code) - sigmoid(x)
            const double g = step * ((code[i] == 0 ? 1.0 : 0.0) - f);
            center_grad.noalias() += g * node.transpose();
            node.noalias() += g * table.word_vectors.row(center);
          }
          table.word_vectors.row(center) += center_grad.transpose();
        }
      }
    }
  }
  return table;
}

std::size_t DescriptionMatrix::present_count() const noexcept {
  std::size_t n = 0;
  for (auto z : present) n += z != 0;
  return n;
}

DescriptionMatrix DescriptionMatrix::empty(Eigen::Index n_items, Eigen::Index dim) {
  return {Matrix::Zero(n_items, dim), std::vector<std::uint8_t>(static_cast<std::size_t>(n_items), 0)};
}

EmbeddedDescription embed_description(const text::TokenList& tokens, const text::Vocabulary& vocab,
                                      const EmbeddingTable& table) {
  EmbeddedDescription out{Vector::Zero(table.dim()), false};
  std::size_t known = 0;
  for (const auto& token : tokens) {
    if (auto id = vocab.find(token)) {
      out.vector += table.word_vectors.row(static_cast<Eigen::Index>(*id)).transpose();
      ++known;
    }
  }
  if (known > 0) {
    out.vector /= static_cast<double>(known);
    out.present = true;
  }
  return out;
}

DescriptionMatrix build_description_matrix(const std::vector<text::TokenList>& descriptions,
                                           const text::Vocabulary& vocab, const EmbeddingTable& table) {
  if (static_cast<std::size_t>(table.n_words()) != vocab.size()) {
    throw DimensionError("embedding table does not match vocabulary");
  }
  auto matrix = DescriptionMatrix::empty(static_cast<Eigen::Index>(descriptions.size()), table.dim());
  for (std::size_t v = 0; v < descriptions.size(); ++v) {
    auto item = embed_description(descriptions[v], vocab, table);
    if (!item.present) continue;
    matrix.rows.row(static_cast<Eigen::Index>(v)) = item.vector.transpose();
    matrix.present[v] = 1;
  }
  return matrix;
}

void write_word_vectors(std::ostream& out, const text::Vocabulary& vocab, const EmbeddingTable& table) {
  if (static_cast<std::size_t>(table.n_words()) != vocab.size()) {
    throw DimensionError("embedding table does not match vocabulary");
  }
  out << table.n_words() << ' ' << table.dim() << '\n';
  for (Eigen::Index w = 0; w < table.n_words(); ++w) {
    out << vocab.word(static_cast<std::size_t>(w));
    for (Eigen::Index j = 0; j < table.dim(); ++j) out << ' ' << detail::format_double(table.word_vectors(w, j));
    out << '\n';
  }
}

void write_node_vectors(std::ostream& out, const EmbeddingTable& table) {
  out << table.node_vectors.rows() << ' ' << table.node_vectors.cols() << '\n';
  for (Eigen::Index n = 0; n < table.node_vectors.rows(); ++n) {
    out << n;
    for (Eigen::Index j = 0; j < table.node_vectors.cols(); ++j) {
      out << ' ' << detail::format_double(table.node_vectors(n, j));
    }
    out << '\n';
  }
}

namespace {

struct KeyedRows {
  std::vector<std::string> keys;
  Matrix rows;
};

KeyedRows read_keyed_rows(std::istream& in, const char* what) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError(what, line_no, "missing header");
  const auto header = detail::split_whitespace(line);
  const auto count_field = header.size() == 2 ? detail::parse_size(header[0]) : std::nullopt;
  const auto dim_field = header.size() == 2 ? detail::parse_size(header[1]) : std::nullopt;
  if (!count_field || !dim_field) throw ParseError(what, line_no, "header must be \"count dim\"");
  const std::size_t count = *count_field;
  const std::size_t dim = *dim_field;
  KeyedRows out;
  out.rows.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  out.keys.reserve(count);
  for (std::size_t r = 0; r < count; ++r) {
    ++line_no;
    if (!std::getline(in, line)) throw ParseError(what, line_no, "unexpected end of file");
    const auto fields = detail::split_whitespace(line);
    if (fields.size() != dim + 1) throw ParseError(what, line_no, "expected key and " + std::to_string(dim) + " values");
    out.keys.emplace_back(fields[0]);
    for (std::size_t j = 0; j < dim; ++j) {
      const auto value = detail::parse_double(fields[j + 1]);
      if (!value) throw ParseError(what, line_no, "bad number '" + std::string(fields[j + 1]) + "'");
      out.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = *value;
    }
  }
  return out;
}

}  // namespace

LoadedEmbeddings read_word_vectors(std::istream& in) {
  auto rows = read_keyed_rows(in, "word vectors");
  LoadedEmbeddings out;
  out.words = std::move(rows.keys);
  out.table.word_vectors = std::move(rows.rows);
  out.table.node_vectors = Matrix::Zero(std::max<Eigen::Index>(0, out.table.word_vectors.rows() - 1),
                                        out.table.word_vectors.cols());
  return out;
}

Matrix read_node_vectors(std::istream& in) {
  auto rows = read_keyed_rows(in, "node vectors");
  for (std::size_t n = 0; n < rows.keys.size(); ++n) {
    if (rows.keys[n] != std::to_string(n)) throw DataError("node vectors must be keyed 0..K-2 in order");
  }
  return std::move(rows.rows);
}

std::filesystem::path node_file_for(const std::filesystem::path& path) {
  auto p = path;
  p += ".nodes";
  return p;
}

std::filesystem::path vocab_file_for(const std::filesystem::path& path) {
  auto p = path;
  p += ".vocab";
  return p;
}

void save_embeddings(const std::filesystem::path& path, const text::Vocabulary& vocab,
                     const EmbeddingTable& table) {
  detail::write_atomically(path, [&](std::ostream& out) { write_word_vectors(out, vocab, table); });
  detail::write_atomically(node_file_for(path), [&](std::ostream& out) { write_node_vectors(out, table); });
  detail::write_atomically(vocab_file_for(path), [&](std::ostream& out) { vocab.write(out); });
}

EmbeddingBundle load_embeddings(const std::filesystem::path& path) {
  auto open = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw DataError("cannot open " + p.string());
    return in;
  };
  auto words_in = open(path);
  auto loaded = read_word_vectors(words_in);
  auto vocab_in = open(vocab_file_for(path));
  EmbeddingBundle bundle{text::Vocabulary::read(vocab_in), std::move(loaded.table)};
  if (bundle.vocab.words() != loaded.words) throw DataError("vocabulary file does not match " + path.string());
  auto nodes_in = open(node_file_for(path));
  bundle.table.node_vectors = read_node_vectors(nodes_in);
  if (bundle.table.node_vectors.rows() != std::max<Eigen::Index>(0, bundle.table.n_words() - 1) ||
      (bundle.table.node_vectors.rows() > 0 && bundle.table.node_vectors.cols() != bundle.table.dim())) {
    throw DimensionError("node vectors do not match word vectors");
  }
  bundle.table.node_vectors.conservativeResize(bundle.table.node_vectors.rows(), bundle.table.dim());
  return bundle;
}

}  // namespace recf::embed
