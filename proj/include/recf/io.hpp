#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "recf/evaluation.hpp"
#include "recf/factor_model.hpp"
#include "recf/text_corpus.hpp"

namespace recf::io {

enum class RatingFormat { double_colon, tab, comma };

RatingFormat parse_format(std::string_view name);
std::string_view to_string(RatingFormat format);
std::string_view separator(RatingFormat format);

/// Raw external id <-> dense 0-based index. Dense ids follow first appearance.
class IdMap {
 public:
  std::size_t intern(std::string_view raw);
  std::optional<std::size_t> find(std::string_view raw) const;
  const std::string& raw(std::size_t dense) const { return raws_.at(dense); }
  const std::vector<std::string>& raws() const noexcept { return raws_; }
  std::size_t size() const noexcept { return raws_.size(); }

  friend bool operator==(const IdMap& a, const IdMap& b) { return a.raws_ == b.raws_; }

 private:
  std::vector<std::string> raws_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct RatingsFile {
  model::SparseRatings ratings;
  IdMap users;
  IdMap items;
};

/// "user<sep>item<sep>rating[<sep>timestamp]" per line; blank lines are skipped.
RatingsFile read_ratings(std::istream& in, RatingFormat format, model::RatingScale scale = {},
                         std::string_view source = "ratings");
RatingsFile parse_ratings(const std::filesystem::path& path, RatingFormat format, model::RatingScale scale = {});

/// Writes entries in stored order using the raw ids.
void write_ratings(std::ostream& out, const RatingsFile& file, RatingFormat format);

/// "user<sep>item<sep>label" with label 0 or 1. Unseen ids extend the maps,
/// so the grid may grow; callers resize the ratings to match.
model::SparseLabels read_labels(std::istream& in, RatingFormat format, IdMap& users, IdMap& items,
                                std::string_view source = "labels");

struct HeldOut {
  std::vector<model::Entry> entries;
  std::size_t skipped = 0;  // lines naming users or items the maps do not know
};

/// Test triplets resolved against existing id maps.
HeldOut read_test(std::istream& in, RatingFormat format, const IdMap& users, const IdMap& items,
                  std::string_view source = "test");

struct DescriptionFile {
  std::vector<text::TokenList> items;  // indexed by dense item id; empty when absent
  text::Corpus corpus;                 // every description line, in file order
  std::size_t unmatched = 0;           // lines for items outside the map
};

/// "itemId<sep>title<sep>tag1, tag2, ..." or "itemId<sep>tag1|tag2|...".
DescriptionFile read_descriptions(std::istream& in, RatingFormat format, const IdMap& items,
                                  std::string_view source = "descriptions");
DescriptionFile parse_descriptions(const std::filesystem::path& path, RatingFormat format, const IdMap& items);

// ---------------------------------------------------------------------------
// Model files

inline constexpr std::string_view kModelMagic = "recf-model";
inline constexpr std::string_view kModelVersion = "v1";

struct ModelFile {
  model::HybridModel model;
  IdMap users;
  IdMap items;
};

/// Header "recf-model v1 N M d e", then [U] [V] [B_R] [B_L] [W_C] blocks,
/// row-major, one matrix row per line, 17 significant digits. Trailing
/// [scale], [users] and [items] sections carry what prediction needs.
void write_model(std::ostream& out, const ModelFile& file);
ModelFile read_model(std::istream& in, std::string_view source = "model");

void save_model(const std::filesystem::path& path, const ModelFile& file);
ModelFile load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Run configuration

/// Everything a command can be configured with. Loaded from flat
/// "key = value" files; '#' starts a comment.
struct RunConfig {
  model::FitConfig fit;
  embed::SkipgramConfig skipgram;
  std::size_t min_count = 1;

  std::filesystem::path ratings;
  std::filesystem::path labels;
  std::filesystem::path descriptions;
  std::filesystem::path corpus;
  std::filesystem::path embeddings;
  std::filesystem::path test;
  std::filesystem::path model;
  std::filesystem::path output_dir = ".";

  RatingFormat format = RatingFormat::double_colon;
  model::RatingScale scale;
  double label_threshold = 3.0;

  std::vector<int> n_values{3, 5, 10, 15, 20};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<eval::Variant> variants{eval::Variant::recf, eval::Variant::no_desc, eval::Variant::ratings_only};
  bool record_timing = false;

  /// Sets one key; relative paths resolve against base_dir.
  void set(std::string_view key, std::string_view value, const std::filesystem::path& base_dir = {});
  /// Sets fit and skip-gram seeds together.
  void set_seed(std::uint64_t seed);
  /// Numeric checks from the owning types plus existence of every named input path.
  void validate() const;

  eval::SweepConfig sweep_config() const;
};

RunConfig read_config(std::istream& in, const std::filesystem::path& base_dir = {},
                      std::string_view source = "config");
RunConfig load_config(const std::filesystem::path& path);
/// Writes every key in the same syntax read_config accepts.
void write_config(std::ostream& out, const RunConfig& cfg);

}  // namespace recf::io
