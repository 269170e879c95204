#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "recf/text_corpus.hpp"

namespace recf::embed {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Input vectors for every vocabulary word plus output vectors for the
/// K-1 inner nodes of the Huffman tree.
struct EmbeddingTable {
  Matrix word_vectors;  // K x e
  Matrix node_vectors;  // (K-1) x e

  Eigen::Index dim() const noexcept { return word_vectors.cols(); }
  Eigen::Index n_words() const noexcept { return word_vectors.rows(); }

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.word_vectors.rows() == b.word_vectors.rows() &&
           a.word_vectors.cols() == b.word_vectors.cols() &&
           a.node_vectors.rows() == b.node_vectors.rows() &&
           a.word_vectors == b.word_vectors && a.node_vectors == b.node_vectors;
  }
};

struct SkipgramConfig {
  int dim = 10;
  int window = 5;
  int epochs = 5;
  double initial_step = 0.025;
  /// Decay the step linearly to 2.5% of initial_step over the whole run.
  /// With decay off the step stays at initial_step.
  bool linear_decay = true;
  std::uint64_t seed = 1;

  void validate() const;
};

/// p(target | center) under hierarchical softmax: the product of sigmoid
/// branch decisions along the target's tree path, scored against the
/// center word's input vector.
double hs_probability(std::size_t center, std::size_t target, const EmbeddingTable& table,
                      const text::HuffmanTree& tree);

/// Same as hs_probability, looking words up by token.
double hs_probability(std::string_view center, std::string_view target, const text::Vocabulary& vocab,
                      const EmbeddingTable& table, const text::HuffmanTree& tree);

/// Average over corpus positions of the summed log-probabilities of every
/// context word within the window. Out-of-vocabulary tokens are dropped
/// before windows are formed, as in training.
double average_log_probability(const text::Corpus& corpus, const text::Vocabulary& vocab,
                               const EmbeddingTable& table, const text::HuffmanTree& tree, int window);

/// Skip-gram training with hierarchical softmax by plain SGD. Single-threaded
/// and bit-reproducible for a given seed.
EmbeddingTable train_skipgram(const text::Corpus& corpus, const text::Vocabulary& vocab,
                              const text::HuffmanTree& tree, const SkipgramConfig& cfg);

/// Per-item description vectors C and presence flags z.
struct DescriptionMatrix {
  Matrix rows;                        // M x e; missing rows hold zeros
  std::vector<std::uint8_t> present;  // z_v

  Eigen::Index n_items() const noexcept { return rows.rows(); }
  Eigen::Index dim() const noexcept { return rows.cols(); }
  std::size_t present_count() const noexcept;

  /// M items, no descriptions at all.
  static DescriptionMatrix empty(Eigen::Index n_items, Eigen::Index dim = 0);
};

struct EmbeddedDescription {
  Vector vector;
  bool present = false;
};

/// Mean of the word vectors of the in-vocabulary tokens. Unknown tokens are
/// skipped; no known token means no description.
EmbeddedDescription embed_description(const text::TokenList& tokens, const text::Vocabulary& vocab,
                                      const EmbeddingTable& table);

DescriptionMatrix build_description_matrix(const std::vector<text::TokenList>& descriptions,
                                           const text::Vocabulary& vocab, const EmbeddingTable& table);

// Text persistence. The word file has a "K e" header then "token v1 .. ve"
// per line; the node file shares the layout keyed by node id.
void write_word_vectors(std::ostream& out, const text::Vocabulary& vocab, const EmbeddingTable& table);
void write_node_vectors(std::ostream& out, const EmbeddingTable& table);

struct LoadedEmbeddings {
  std::vector<std::string> words;
  EmbeddingTable table;
};

LoadedEmbeddings read_word_vectors(std::istream& in);
Matrix read_node_vectors(std::istream& in);

/// Writes <path>, <path>.nodes and <path>.vocab.
void save_embeddings(const std::filesystem::path& path, const text::Vocabulary& vocab,
                     const EmbeddingTable& table);

struct EmbeddingBundle {
  text::Vocabulary vocab;
  EmbeddingTable table;
};

/// Reads the three files written by save_embeddings.
EmbeddingBundle load_embeddings(const std::filesystem::path& path);

std::filesystem::path node_file_for(const std::filesystem::path& path);
std::filesystem::path vocab_file_for(const std::filesystem::path& path);

}  // namespace recf::embed
