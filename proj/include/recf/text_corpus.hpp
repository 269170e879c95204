#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace recf::text {

using TokenList = std::vector<std::string>;
/// One token sequence per line of input text.
using Corpus = std::vector<TokenList>;

/// Lowercases and splits on whitespace, commas, pipes and semicolons.
/// Surrounding punctuation is stripped from each piece; internal
/// apostrophes and hyphens survive ("children's", "sci-fi").
TokenList tokenize(std::string_view text);

/// Reads a line-oriented corpus, one sentence per line. Lines without any
/// token are dropped.
Corpus read_corpus(std::istream& in);

class Vocabulary {
 public:
  Vocabulary() = default;

  /// Words are ordered by descending count; ties keep first-appearance order.
  static Vocabulary from_counts(std::vector<std::pair<std::string, std::uint64_t>> counts);

  std::size_t size() const noexcept { return words_.size(); }
  bool empty() const noexcept { return words_.empty(); }

  const std::string& word(std::size_t id) const { return words_.at(id); }
  std::uint64_t count(std::size_t id) const { return counts_.at(id); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

  std::optional<std::size_t> find(std::string_view token) const;
  /// Throws DataError for tokens outside the vocabulary.
  std::size_t id(std::string_view token) const;

  /// Total number of in-vocabulary tokens in the stream it was built from.
  std::uint64_t total_count() const noexcept;

  /// Debug dump, one "token<TAB>count" per line.
  void write(std::ostream& out) const;
  static Vocabulary read(std::istream& in);

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Counts tokens over the corpus and keeps those seen at least min_count times.
Vocabulary build_vocab(const Corpus& corpus, std::size_t min_count = 1);

/// Hierarchical-softmax tree over a vocabulary.
///
/// Inner nodes are numbered 0..K-2 in creation order, so the root is K-2.
/// For word w, path(w) lists the inner nodes from the root down to the
/// leaf's parent and code(w)[i] is 0 when the path takes the designated
/// (left) child at path(w)[i] and 1 otherwise.
struct HuffmanTree {
  std::size_t n_words = 0;
  std::vector<std::vector<std::uint32_t>> paths;
  std::vector<std::vector<std::uint8_t>> codes;

  std::size_t inner_node_count() const noexcept { return n_words > 0 ? n_words - 1 : 0; }
  /// L(w) - 1 in the usual notation.
  std::size_t depth(std::size_t word) const { return paths.at(word).size(); }

  friend bool operator==(const HuffmanTree&, const HuffmanTree&) = default;
};

/// Frequency-based Huffman coding. Equal weights are broken by node index,
/// with the lower index treated as lighter; leaves precede inner nodes.
HuffmanTree build_huffman(const Vocabulary& vocab);

}  // namespace recf::text
