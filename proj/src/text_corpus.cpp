#include "recf/text_corpus.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>
#include <queue>

#include "recf/error.hpp"

namespace recf::text {
namespace {

bool is_separator(unsigned char c) {
  return std::isspace(c) || c == ',' || c == '|' || c == ';';
}

// Bytes >= 0x80 belong to multi-byte UTF-8 sequences and count as word characters.
bool is_word_char(unsigned char c) { return c >= 0x80 || std::isalnum(c); }

void push_token(std::string_view piece, TokenList& out) {
  std::size_t begin = 0;
  std::size_t end = piece.size();
  while (begin < end && !is_word_char(static_cast<unsigned char>(piece[begin]))) ++begin;
  while (end > begin && !is_word_char(static_cast<unsigned char>(piece[end - 1]))) --end;
  if (begin == end) return;
  std::string token(piece.substr(begin, end - begin));
  for (auto& ch : token) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80) ch = static_cast<char>(std::tolower(c));
  }
  out.push_back(std::move(token));
}

}  // namespace

TokenList tokenize(std::string_view text) {
  TokenList tokens;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || is_separator(static_cast<unsigned char>(text[i]))) {
      if (i > start) push_token(text.substr(start, i - start), tokens);
      start = i + 1;
    }
  }
  return tokens;
}

Corpus read_corpus(std::istream& in) {
  Corpus corpus;
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = tokenize(line);
    if (!tokens.empty()) corpus.push_back(std::move(tokens));
  }
  return corpus;
}

Vocabulary Vocabulary::from_counts(std::vector<std::pair<std::string, std::uint64_t>> counts) {
  std::stable_sort(counts.begin(), counts.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary vocab;
  vocab.words_.reserve(counts.size());
  vocab.counts_.reserve(counts.size());
  for (auto& [word, count] : counts) {
    if (!vocab.index_.emplace(word, vocab.words_.size()).second) {
      throw DataError("duplicate vocabulary token '" + word + "'");
    }
    vocab.words_.push_back(std::move(word));
    vocab.counts_.push_back(count);
  }
  return vocab;
}

std::optional<std::size_t> Vocabulary::find(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::id(std::string_view token) const {
  if (auto found = find(token)) return *found;
  throw DataError("unknown word '" + std::string(token) + "'");
}

std::uint64_t Vocabulary::total_count() const noexcept {
  std::uint64_t total = 0;
  for (auto c : counts_) total += c;
  return total;
}

void Vocabulary::write(std::ostream& out) const {
  for (std::size_t i = 0; i < words_.size(); ++i) out << words_[i] << '\t' << counts_[i] << '\n';
}

Vocabulary Vocabulary::read(std::istream& in) {
  std::vector<std::pair<std::string, std::uint64_t>> counts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError("vocabulary", line_no, "expected token<TAB>count");
    try {
      std::size_t used = 0;
      const auto count = std::stoull(line.substr(tab + 1), &used);
      if (used != line.size() - tab - 1) throw std::invalid_argument("trailing");
      counts.emplace_back(line.substr(0, tab), count);
    } catch (const std::logic_error&) {
      throw ParseError("vocabulary", line_no, "bad count");
    }
  }
  return from_counts(std::move(counts));
}

Vocabulary build_vocab(const Corpus& corpus, std::size_t min_count) {
  if (min_count < 1) throw ConfigError("min_count must be at least 1");
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::pair<std::string, std::uint64_t>> counts;
  for (const auto& line : corpus) {
    for (const auto& token : line) {
      auto [it, inserted] = slot.emplace(token, counts.size());
      if (inserted) counts.emplace_back(token, 0);
      ++counts[it->second].second;
    }
  }
  std::erase_if(counts, [&](const auto& wc) { return wc.second < min_count; });
  if (counts.empty()) throw EmptyVocabularyError("no token reaches min_count " + std::to_string(min_count));
  return Vocabulary::from_counts(std::move(counts));
}

HuffmanTree build_huffman(const Vocabulary& vocab) {
  const std::size_t k = vocab.size();
  HuffmanTree tree;
  tree.n_words = k;
  tree.paths.assign(k, {});
  tree.codes.assign(k, {});
  if (k < 2) return tree;

  // Node ids: leaves 0..K-1, inner nodes K..2K-2. Heap ordered by (weight, id).
  using Entry = std::pair<std::uint64_t, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  for (std::size_t w = 0; w < k; ++w) heap.emplace(vocab.count(w), w);

  std::vector<std::size_t> parent(2 * k - 1, 0);
  std::vector<std::uint8_t> branch(2 * k - 1, 0);
  for (std::size_t next = k; next < 2 * k - 1; ++next) {
    const auto [w0, lighter] = heap.top();
    heap.pop();
    const auto [w1, heavier] = heap.top();
    heap.pop();
    parent[lighter] = next;
    parent[heavier] = next;
    branch[lighter] = 0;
    branch[heavier] = 1;
    heap.emplace(w0 + w1, next);
  }

  const std::size_t root = 2 * k - 2;
  for (std::size_t w = 0; w < k; ++w) {
    auto& path = tree.paths[w];
    auto& code = tree.codes[w];
    for (std::size_t node = w; node != root; node = parent[node]) {
      code.push_back(branch[node]);
      path.push_back(static_cast<std::uint32_t>(parent[node] - k));
    }
    std::reverse(path.begin(), path.end());
    std::reverse(code.begin(), code.end());
  }
  return tree;
}

}  // namespace recf::text
