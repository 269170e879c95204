#include "recf/io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unistd.h>

#include "recf/detail/text_format.hpp"
#include "recf/error.hpp"

namespace recf {
namespace detail {

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::vector<std::string_view> split(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
}

std::string_view trim(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  return text;
}

void write_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    body(out);
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw DataError("write failed for " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

namespace io {
namespace {

using detail::format_double;
using detail::parse_double;
using detail::trim;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

struct RawTriplet {
  std::string_view user;
  std::string_view item;
  double value = 0.0;
};

// Splits one data line into user, item, value (and an ignored timestamp).
RawTriplet parse_triplet(std::string_view line, RatingFormat format, std::string_view source, std::size_t line_no) {
  auto fields = detail::split(line, separator(format));
  if (fields.size() < 3 || fields.size() > 4) {
    throw ParseError(std::string(source), line_no, "expected user" + std::string(separator(format)) + "item" +
                                                       std::string(separator(format)) + "value[" +
                                                       std::string(separator(format)) + "timestamp]");
  }
  RawTriplet t{trim(fields[0]), trim(fields[1])};
  if (t.user.empty() || t.item.empty()) throw ParseError(std::string(source), line_no, "empty user or item id");
  const auto value = parse_double(fields[2]);
  if (!value) throw ParseError(std::string(source), line_no, "bad value '" + std::string(trim(fields[2])) + "'");
  t.value = *value;
  return t;
}

bool is_blank(std::string_view line) { return trim(line).empty(); }

void write_matrix(std::ostream& out, std::string_view name, const model::Matrix& m) {
  out << '[' << name << "]\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ' ';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

class LineReader {
 public:
  LineReader(std::istream& in, std::string_view source) : in_(in), source_(source) {}

  std::string next(const char* expecting) {
    std::string line;
    if (!std::getline(in_, line)) throw ParseError(source_, line_no_ + 1, std::string("unexpected end of file, expected ") + expecting);
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  bool next_optional(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!is_blank(line)) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, line_no_, what); }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_no_ = 0;
};

model::Matrix read_matrix(LineReader& reader, std::string_view name, Eigen::Index rows, Eigen::Index cols) {
  const std::string header = reader.next("section header");
  if (trim(header) != "[" + std::string(name) + "]") reader.fail("expected section [" + std::string(name) + "]");
  model::Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::string line = reader.next("matrix row");
    const auto fields = detail::split_whitespace(line);
    if (static_cast<Eigen::Index>(fields.size()) != cols) {
      reader.fail("expected " + std::to_string(cols) + " values in " + std::string(name));
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto v = parse_double(fields[static_cast<std::size_t>(c)]);
      if (!v) reader.fail("bad number '" + std::string(fields[static_cast<std::size_t>(c)]) + "'");
      m(r, c) = *v;
    }
  }
  return m;
}

}  // namespace

RatingFormat parse_format(std::string_view name) {
  if (name == "double-colon" || name == "::" || name == "dat") return RatingFormat::double_colon;
  if (name == "tab" || name == "tsv") return RatingFormat::tab;
  if (name == "comma" || name == "csv") return RatingFormat::comma;
  throw ConfigError("unknown format '" + std::string(name) + "' (expected double-colon, tab or comma)");
}

std::string_view to_string(RatingFormat format) {
  switch (format) {
    case RatingFormat::double_colon: return "double-colon";
    case RatingFormat::tab: return "tab";
    case RatingFormat::comma: return "comma";
  }
  return "double-colon";
}

std::string_view separator(RatingFormat format) {
  switch (format) {
    case RatingFormat::double_colon: return "::";
    case RatingFormat::tab: return "\t";
    case RatingFormat::comma: return ",";
  }
  return "::";
}

std::size_t IdMap::intern(std::string_view raw) {
  auto [it, inserted] = index_.emplace(std::string(raw), raws_.size());
  if (inserted) raws_.emplace_back(raw);
  return it->second;
}

std::optional<std::size_t> IdMap::find(std::string_view raw) const {
  const auto it = index_.find(std::string(raw));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

RatingsFile read_ratings(std::istream& in, RatingFormat format, model::RatingScale scale, std::string_view source) {
  RatingsFile file;
  file.ratings.scale = scale;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const auto t = parse_triplet(line, format, source, line_no);
    if (!scale.contains(t.value)) {
      throw ParseError(std::string(source), line_no,
                       "rating " + format_double(t.value) + " is outside the scale [" + format_double(scale.min) +
                           ", " + format_double(scale.max) + "]");
    }
    const auto u = file.users.intern(t.user);
    const auto v = file.items.intern(t.item);
    if (!seen.emplace(u, v).second) {
      throw ParseError(std::string(source), line_no,
                       "duplicate rating for user " + std::string(t.user) + ", item " + std::string(t.item));
    }
    file.ratings.entries.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v), t.value});
  }
  file.ratings.n_users = file.users.size();
  file.ratings.n_items = file.items.size();
  return file;
}

RatingsFile parse_ratings(const std::filesystem::path& path, RatingFormat format, model::RatingScale scale) {
  auto in = open_input(path);
  return read_ratings(in, format, scale, path.string());
}

void write_ratings(std::ostream& out, const RatingsFile& file, RatingFormat format) {
  const auto sep = separator(format);
  for (const auto& e : file.ratings.entries) {
    out << file.users.raw(e.user) << sep << file.items.raw(e.item) << sep << format_double(e.value) << '\n';
  }
}

model::SparseLabels read_labels(std::istream& in, RatingFormat format, IdMap& users, IdMap& items,
                                std::string_view source) {
  model::SparseLabels labels;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const auto t = parse_triplet(line, format, source, line_no);
    if (t.value != 0.0 && t.value != 1.0) throw ParseError(std::string(source), line_no, "labels must be 0 or 1");
    const auto u = users.intern(t.user);
    const auto v = items.intern(t.item);
    if (!seen.emplace(u, v).second) throw ParseError(std::string(source), line_no, "duplicate label cell");
    labels.entries.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v), t.value});
  }
  labels.n_users = users.size();
  labels.n_items = items.size();
  return labels;
}

HeldOut read_test(std::istream& in, RatingFormat format, const IdMap& users, const IdMap& items,
                  std::string_view source) {
  HeldOut out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const auto t = parse_triplet(line, format, source, line_no);
    const auto u = users.find(t.user);
    const auto v = items.find(t.item);
    if (!u || !v) {
      ++out.skipped;
      continue;
    }
    out.entries.push_back({static_cast<std::uint32_t>(*u), static_cast<std::uint32_t>(*v), t.value});
  }
  return out;
}

DescriptionFile read_descriptions(std::istream& in, RatingFormat format, const IdMap& items,
                                  std::string_view source) {
  DescriptionFile file;
  file.items.assign(items.size(), {});
  const auto sep = separator(format);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const auto fields = detail::split(line, sep);
    if (fields.size() < 2) throw ParseError(std::string(source), line_no, "expected itemId" + std::string(sep) + "tags");
    const auto id = trim(fields[0]);
    if (id.empty()) throw ParseError(std::string(source), line_no, "empty item id");
    // Two fields: id, tags. Three or more: id, title, then the tags (which may contain the separator).
    std::string tags;
    if (fields.size() == 2) {
      tags = std::string(fields[1]);
    } else {
      for (std::size_t i = 2; i < fields.size(); ++i) {
        if (i > 2) tags += sep;
        tags += fields[i];
      }
    }
    auto tokens = text::tokenize(tags);
    file.corpus.push_back(tokens);
    if (const auto v = items.find(id)) {
      auto& slot = file.items[*v];
      slot.insert(slot.end(), tokens.begin(), tokens.end());
    } else {
      ++file.unmatched;
    }
  }
  return file;
}

DescriptionFile parse_descriptions(const std::filesystem::path& path, RatingFormat format, const IdMap& items) {
  auto in = open_input(path);
  return read_descriptions(in, format, items, path.string());
}

void write_model(std::ostream& out, const ModelFile& file) {
  const auto& m = file.model;
  m.validate();
  if (file.users.size() != static_cast<std::size_t>(m.n_users()) ||
      file.items.size() != static_cast<std::size_t>(m.n_items())) {
    throw DimensionError("id maps do not match the model");
  }
  out << kModelMagic << ' ' << kModelVersion << ' ' << m.n_users() << ' ' << m.n_items() << ' ' << m.rank() << ' '
      << m.description_dim() << '\n';
  write_matrix(out, "U", m.U);
  write_matrix(out, "V", m.V);
  write_matrix(out, "B_R", m.B_R);
  write_matrix(out, "B_L", m.B_L);
  write_matrix(out, "W_C", m.W_C);
  out << "[scale]\n" << format_double(m.scale.min) << ' ' << format_double(m.scale.max) << '\n';
  out << "[users]\n";
  for (const auto& raw : file.users.raws()) out << raw << '\n';
  out << "[items]\n";
  for (const auto& raw : file.items.raws()) out << raw << '\n';
}

ModelFile read_model(std::istream& in, std::string_view source) {
  LineReader reader(in, source);
  const std::string header = reader.next("model header");
  const auto fields = detail::split_whitespace(header);
  if (fields.size() != 6 || fields[0] != kModelMagic) reader.fail("not a recf model file");
  if (fields[1] != kModelVersion) reader.fail("unsupported model version '" + std::string(fields[1]) + "'");
  std::size_t dims[4];
  for (int i = 0; i < 4; ++i) {
    const auto v = detail::parse_size(fields[static_cast<std::size_t>(i + 2)]);
    if (!v) reader.fail("bad dimension in header");
    dims[i] = *v;
  }
  const auto n = static_cast<Eigen::Index>(dims[0]);
  const auto m = static_cast<Eigen::Index>(dims[1]);
  const auto d = static_cast<Eigen::Index>(dims[2]);
  const auto e = static_cast<Eigen::Index>(dims[3]);

  ModelFile file;
  file.model.U = read_matrix(reader, "U", n, d);
  file.model.V = read_matrix(reader, "V", m, d);
  file.model.B_R = read_matrix(reader, "B_R", d, d);
  file.model.B_L = read_matrix(reader, "B_L", d, d);
  file.model.W_C = read_matrix(reader, "W_C", d, e);

  if (trim(reader.next("[scale]")) != "[scale]") reader.fail("expected section [scale]");
  const auto scale_fields = detail::split_whitespace(reader.next("scale bounds"));
  const auto lo = scale_fields.size() == 2 ? parse_double(scale_fields[0]) : std::nullopt;
  const auto hi = scale_fields.size() == 2 ? parse_double(scale_fields[1]) : std::nullopt;
  if (!lo || !hi) reader.fail("expected \"min max\" scale bounds");
  file.model.scale = {*lo, *hi};

  if (trim(reader.next("[users]")) != "[users]") reader.fail("expected section [users]");
  for (Eigen::Index u = 0; u < n; ++u) {
    if (file.users.intern(trim(reader.next("user id"))) != static_cast<std::size_t>(u)) reader.fail("duplicate user id");
  }
  if (trim(reader.next("[items]")) != "[items]") reader.fail("expected section [items]");
  for (Eigen::Index v = 0; v < m; ++v) {
    if (file.items.intern(trim(reader.next("item id"))) != static_cast<std::size_t>(v)) reader.fail("duplicate item id");
  }
  std::string rest;
  if (reader.next_optional(rest)) reader.fail("trailing content after [items]");
  file.model.validate();
  return file;
}

void save_model(const std::filesystem::path& path, const ModelFile& file) {
  detail::write_atomically(path, [&](std::ostream& out) { write_model(out, file); });
}

ModelFile load_model(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_model(in, path.string());
}

}  // namespace io
}  // namespace recf
