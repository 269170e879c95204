#include <doctest.h>

#include <fstream>
#include <limits>
#include <sstream>

#include "recf/detail/text_format.hpp"
#include "recf/error.hpp"
#include "recf/io.hpp"
#include "support/instances.hpp"
#include "support/scratch.hpp"

using namespace recf;
using io::RatingFormat;

TEST_CASE("double-colon ratings line") {
  std::istringstream in("1::1193::5::978300760\n");
  const auto f = io::read_ratings(in, RatingFormat::double_colon);
  REQUIRE(f.ratings.entries.size() == 1);
  CHECK(f.ratings.entries[0] == model::Entry{0, 0, 5.0});
  CHECK(f.users.raw(0) == "1");
  CHECK(f.items.raw(0) == "1193");
  CHECK(f.ratings.n_users == 1);
  CHECK(f.ratings.n_items == 1);
}

TEST_CASE("empty ratings file") {
  std::istringstream in("");
  const auto f = io::read_ratings(in, RatingFormat::double_colon);
  CHECK(f.ratings.entries.empty());
  CHECK(f.ratings.n_users == 0);
  CHECK(f.ratings.n_items == 0);
}

TEST_CASE("ratings errors carry line numbers") {
  auto line_of = [](const std::string& text, RatingFormat fmt) -> std::size_t {
    std::istringstream in(text);
    try {
      io::read_ratings(in, fmt);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("1::1193::9\n", RatingFormat::double_colon) == 1);
  CHECK(line_of("1::2::3\n\n1::3\n", RatingFormat::double_colon) == 3);
  CHECK(line_of("1::2::3\n1::2::4\n", RatingFormat::double_colon) == 2);
  CHECK(line_of("1\t2\tfive\n", RatingFormat::tab) == 1);
  CHECK(line_of("1,2,3,4,5\n", RatingFormat::comma) == 1);
  CHECK(line_of("1::2::3.5\n2::2::1\n", RatingFormat::double_colon) == 0);
}

TEST_CASE("ids are densified in first-appearance order") {
  std::istringstream in("u9\ti5\t3\nu2\ti5\t4\nu9\ti1\t2\n");
  const auto f = io::read_ratings(in, RatingFormat::tab);
  CHECK(f.users.raws() == std::vector<std::string>{"u9", "u2"});
  CHECK(f.items.raws() == std::vector<std::string>{"i5", "i1"});
  CHECK(f.ratings.entries[2] == model::Entry{0, 1, 2.0});
}

TEST_CASE("ratings round-trip through every format") {
  std::istringstream in("10::7::4\n3::7::2.5\n10::8::1\n42::1::5\n");
  const auto original = io::read_ratings(in, RatingFormat::double_colon);
  for (auto fmt : {RatingFormat::double_colon, RatingFormat::tab, RatingFormat::comma}) {
    std::stringstream s;
    io::write_ratings(s, original, fmt);
    const auto again = io::read_ratings(s, fmt);
    CHECK(again.ratings.entries == original.ratings.entries);
    CHECK(again.users == original.users);
    CHECK(again.items == original.items);
  }
}

TEST_CASE("format names") {
  CHECK(io::parse_format("double-colon") == RatingFormat::double_colon);
  CHECK(io::parse_format("tsv") == RatingFormat::tab);
  CHECK(io::parse_format("csv") == RatingFormat::comma);
  CHECK_THROWS_AS(io::parse_format("json"), ConfigError);
}

TEST_CASE("labels extend the id maps and must be binary") {
  std::istringstream rin("1::10::5\n");
  auto f = io::read_ratings(rin, RatingFormat::double_colon);
  std::istringstream lin("1::10::1\n2::11::0\n");
  const auto l = io::read_labels(lin, RatingFormat::double_colon, f.users, f.items);
  CHECK(l.n_users == 2);
  CHECK(l.n_items == 2);
  CHECK(l.entries[1] == model::Entry{1, 1, 0.0});
  std::istringstream bad("1::10::3\n");
  CHECK_THROWS_AS(io::read_labels(bad, RatingFormat::double_colon, f.users, f.items), ParseError);
}

TEST_CASE("test files skip unknown ids") {
  std::istringstream rin("1::10::5\n2::11::3\n");
  const auto f = io::read_ratings(rin, RatingFormat::double_colon);
  std::istringstream tin("1::11::4\n3::10::2\n2::10::1\n");
  const auto held = io::read_test(tin, RatingFormat::double_colon, f.users, f.items);
  CHECK(held.entries.size() == 2);
  CHECK(held.skipped == 1);
  CHECK(held.entries[0] == model::Entry{0, 1, 4.0});
}

TEST_CASE("description lines") {
  std::istringstream rin("u::1::5\nu::6::3\nu::99::2\n");
  const auto f = io::read_ratings(rin, RatingFormat::double_colon);
  std::istringstream din("1::Toy Story::animation|children's|comedy\n6::Sudden Death::action\n500::Nope::drama\n");
  const auto d = io::read_descriptions(din, RatingFormat::double_colon, f.items);
  REQUIRE(d.items.size() == 3);
  CHECK(d.items[0] == text::TokenList{"animation", "children's", "comedy"});
  CHECK(d.items[1] == text::TokenList{"action"});
  CHECK(d.items[2].empty());
  CHECK(d.unmatched == 1);
  CHECK(d.corpus.size() == 3);
}

TEST_CASE("two-field and comma-separated description lines") {
  io::IdMap items;
  items.intern("7");
  std::istringstream two("7\tcomedy|drama\n");
  CHECK(io::read_descriptions(two, RatingFormat::tab, items).items[0] == text::TokenList{"comedy", "drama"});
  std::istringstream three("7,Heat,action, crime, thriller\n");
  CHECK(io::read_descriptions(three, RatingFormat::comma, items).items[0] ==
        text::TokenList{"action", "crime", "thriller"});
  std::istringstream bad("7\n");
  CHECK_THROWS_AS(io::read_descriptions(bad, RatingFormat::double_colon, items), ParseError);
}

namespace {

io::ModelFile sample_model() {
  const auto inst = testing::random_instance(4, 3, 2, 3, 5);
  io::ModelFile f;
  f.model = inst.model;
  f.model.U(0, 0) = 0.1;  // not exactly representable
  f.model.V(1, 1) = -1.0 / 3.0;
  f.model.B_R(0, 1) = 1e-300;
  for (const char* u : {"10", "20", "30", "40"}) f.users.intern(u);
  for (const char* v : {"a", "b", "c"}) f.items.intern(v);
  return f;
}

}  // namespace

TEST_CASE("model files round-trip exactly") {
  const auto f = sample_model();
  std::stringstream s;
  io::write_model(s, f);
  CHECK(s.str().rfind("recf-model v1 4 3 2 3\n[U]\n", 0) == 0);
  const auto g = io::read_model(s);
  CHECK(g.model.U == f.model.U);
  CHECK(g.model.V == f.model.V);
  CHECK(g.model.B_R == f.model.B_R);
  CHECK(g.model.B_L == f.model.B_L);
  CHECK(g.model.W_C == f.model.W_C);
  CHECK(g.model.scale == f.model.scale);
  CHECK(g.users == f.users);
  CHECK(g.items == f.items);
  std::stringstream again;
  io::write_model(again, g);
  std::stringstream first;
  io::write_model(first, f);
  CHECK(again.str() == first.str());
}

TEST_CASE("model files with an empty description block") {
  auto f = sample_model();
  f.model.W_C = Eigen::MatrixXd::Zero(2, 0);
  std::stringstream s;
  io::write_model(s, f);
  const auto g = io::read_model(s);
  CHECK(g.model.W_C.rows() == 2);
  CHECK(g.model.W_C.cols() == 0);
}

TEST_CASE("model reader rejects damaged files") {
  const auto f = sample_model();
  std::stringstream s;
  io::write_model(s, f);
  const auto text = s.str();
  std::istringstream wrong_magic("not-a-model v1 1 1 1 0\n");
  CHECK_THROWS_AS(io::read_model(wrong_magic), ParseError);
  std::istringstream wrong_version("recf-model v9 4 3 2 3\n");
  CHECK_THROWS_AS(io::read_model(wrong_version), ParseError);
  std::istringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(io::read_model(truncated), ParseError);
}

TEST_CASE("save_model writes atomically and loads back") {
  testing::ScratchDir dir("model");
  const auto f = sample_model();
  const auto path = dir.path() / "m.txt";
  io::save_model(path, f);
  CHECK(io::load_model(path).model.V == f.model.V);
  for (const auto& entry : std::filesystem::directory_iterator(dir.path())) CHECK(entry.path() == path);
}

TEST_CASE("doubles keep 17 significant digits") {
  for (double x : {0.1, 1.0 / 3.0, 2.5e-300, -123456.789, 4.0}) {
    CHECK(detail::parse_double(detail::format_double(x)).value() == x);
  }
  CHECK(detail::format_double(4.0) == "4");
  CHECK_FALSE(detail::parse_double("1.5x").has_value());
}

TEST_CASE("config keys") {
  std::istringstream in(
      "# comment\n"
      "d = 5\n"
      "lambda_L = 0.3   # trailing comment\n"
      "m = 1.5\n"
      "schedule = linear\n"
      "k = 0.25\n"
      "gamma = 0.02\n"
      "seed = 9\n"
      "embedding_dim = 7\n"
      "format = tab\n"
      "n_values = 3, 5\n"
      "seeds = 4,5,6\n"
      "variants = RECF, ratings-only\n"
      "ratings = data/r.tsv\n");
  const auto c = io::read_config(in, "/base");
  CHECK(c.fit.d == 5);
  CHECK(c.fit.lambda_L == 0.3);
  CHECK(c.fit.lambda_C_init == 1.5);
  CHECK(c.fit.schedule == model::LambdaSchedule::linear);
  CHECK(c.fit.step_k == 0.25);
  CHECK(c.fit.gamma_U == 0.02);
  CHECK(c.fit.gamma_V == 0.02);
  CHECK(c.fit.seed == 9);
  CHECK(c.skipgram.seed == 9);
  CHECK(c.skipgram.dim == 7);
  CHECK(c.format == RatingFormat::tab);
  CHECK(c.n_values == std::vector<int>{3, 5});
  CHECK(c.seeds == std::vector<std::uint64_t>{4, 5, 6});
  CHECK(c.variants == std::vector<eval::Variant>{eval::Variant::recf, eval::Variant::ratings_only});
  CHECK(c.ratings == std::filesystem::path("/base/data/r.tsv"));
}

TEST_CASE("config errors name the line") {
  auto message = [](const std::string& text) {
    std::istringstream in(text);
    try {
      io::read_config(in, {}, "c.cfg");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("d = 3\nbogus = 1\n").find("c.cfg:2") != std::string::npos);
  CHECK(message("d = three\n").find("c.cfg:1") != std::string::npos);
  CHECK(message("just words\n").find("c.cfg:1") != std::string::npos);
  CHECK(message("min_count = 0\n").find("min_count") != std::string::npos);
}

TEST_CASE("config validation checks paths and ranges") {
  io::RunConfig c;
  CHECK_NOTHROW(c.validate());
  c.ratings = "/definitely/not/here.dat";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.n_values = {2};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.scale = {5, 1};
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("config write/read round-trips") {
  io::RunConfig c;
  c.fit.d = 4;
  c.fit.tol = 1e-6;
  c.fit.qr_retraction = true;
  c.skipgram.window = 3;
  c.seeds = {7};
  c.variants = {eval::Variant::no_desc};
  c.output_dir = "/tmp/out";
  c.record_timing = true;
  std::stringstream s;
  io::write_config(s, c);
  const auto d = io::read_config(s);
  std::stringstream t;
  io::write_config(t, d);
  CHECK(s.str() == t.str());
  CHECK(d.fit.tol == 1e-6);
  CHECK(d.fit.qr_retraction);
  CHECK(d.variants == c.variants);
}

TEST_CASE("load_config resolves paths next to the file") {
  testing::ScratchDir dir("config");
  {
    std::ofstream out(dir.path() / "run.cfg");
    out << "ratings = r.dat\noutput_dir = out\n";
  }
  const auto c = io::load_config(dir.path() / "run.cfg");
  CHECK(c.ratings == dir.path() / "r.dat");
  CHECK(c.output_dir == dir.path() / "out");
  CHECK_THROWS_AS(io::load_config(dir.path() / "missing.cfg"), ConfigError);
}
