#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "recf/detail/text_format.hpp"
#include "support/planted.hpp"
#include "support/scratch.hpp"

using namespace recf;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "recf");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// A small ratings + descriptions dataset written in double-colon format.
struct Workspace {
  testing::ScratchDir dir{"cli"};
  fs::path ratings, descriptions, config;

  Workspace() {
    const auto data = testing::make_planted({.users = 30, .items = 20, .density = 0.6, .seed = 2});
    ratings = dir.path() / "ratings.dat";
    descriptions = dir.path() / "items.dat";
    config = dir.path() / "run.cfg";
    std::ofstream r(ratings), d(descriptions), c(config);
    for (const auto& e : data.ratings.entries) {
      r << "u" << e.user + 1 << "::" << 100 + e.item << "::" << detail::format_double(e.value) << "::0\n";
    }
    for (std::size_t v = 0; v < data.descriptions.size(); ++v) {
      d << 100 + v << "::Title " << v << "::";
      for (std::size_t i = 0; i < data.descriptions[v].size(); ++i) d << (i ? "|" : "") << data.descriptions[v][i];
      d << '\n';
    }
    c << "ratings = ratings.dat\n"
         "descriptions = items.dat\n"
         "d = 3\n"
         "embedding_dim = 4\n"
         "max_iter = 30\n"
         "gamma = 0.01\n"
         "n_values = 3, 5\n"
         "seeds = 1, 2\n"
         "output_dir = out\n";
  }
  fs::path operator/(const std::string& name) const { return dir.path() / name; }
};

}  // namespace

TEST_CASE("train, predict and evaluate") {
  Workspace ws;
  const auto model = ws / "model.txt";
  auto r = run({"train", "--config", ws.config.string(), "--model", model.string()});
  CHECK(r.code == 0);
  CHECK(r.err.find("wrote") != std::string::npos);
  REQUIRE(fs::exists(model));
  CHECK(slurp(model).rfind("recf-model v1 30 20 3 4\n", 0) == 0);

  r = run({"predict", "--model", model.string(), "--user", "u1", "--item", "101"});
  CHECK(r.code == 0);
  const auto score = detail::parse_double(detail::trim(r.out));
  REQUIRE(score.has_value());
  CHECK(*score >= 1.0);
  CHECK(*score <= 5.0);
  CHECK(r.out.find('\n') == r.out.size() - 1);

  r = run({"evaluate", "--model", model.string(), "--test", ws.ratings.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("mae ") != std::string::npos);
  CHECK(r.out.find("rmse_clamped ") != std::string::npos);
}

TEST_CASE("training is byte-for-byte reproducible and seed-sensitive") {
  Workspace ws;
  const auto a = ws / "a.txt", b = ws / "b.txt", c = ws / "c.txt";
  CHECK(run({"train", "-q", "--config", ws.config.string(), "--model", a.string()}).code == 0);
  CHECK(run({"train", "-q", "--config", ws.config.string(), "--model", b.string()}).code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(run({"train", "-q", "--seed", "8", "--config", ws.config.string(), "--model", c.string()}).code == 0);
  CHECK(slurp(a) != slurp(c));
}

TEST_CASE("RECF_SEED overrides the config and --seed overrides both") {
  Workspace ws;
  const auto env = ws / "env.txt", flag = ws / "flag.txt", both = ws / "both.txt";
  CHECK(run({"train", "-q", "--seed", "5", "--config", ws.config.string(), "--model", flag.string()}).code == 0);
  ::setenv("RECF_SEED", "5", 1);
  CHECK(run({"train", "-q", "--config", ws.config.string(), "--model", env.string()}).code == 0);
  CHECK(run({"train", "-q", "--seed", "1", "--config", ws.config.string(), "--model", both.string()}).code == 0);
  ::unsetenv("RECF_SEED");
  CHECK(slurp(env) == slurp(flag));
  const auto plain = ws / "plain.txt";
  CHECK(run({"train", "-q", "--config", ws.config.string(), "--model", plain.string()}).code == 0);
  CHECK(slurp(both) == slurp(plain));
}

TEST_CASE("missing description file degrades with a warning") {
  Workspace ws;
  const auto model = ws / "model.txt";
  const auto r = run({"train", "--config", ws.config.string(), "--descriptions", (ws / "nope.dat").string(), "--model",
                      model.string()});
  CHECK(r.code == 0);
  CHECK(r.err.find("warning") != std::string::npos);
  CHECK(slurp(model).rfind("recf-model v1 30 20 3 0\n", 0) == 0);
}

TEST_CASE("quiet mode keeps stderr empty") {
  Workspace ws;
  const auto r = run({"train", "--quiet", "--config", ws.config.string(), "--model", (ws / "m.txt").string()});
  CHECK(r.code == 0);
  CHECK(r.err.empty());
}

TEST_CASE("sweep writes reproducible reports") {
  Workspace ws;
  auto r = run({"sweep", "--config", ws.config.string()});
  CHECK(r.code == 0);
  CHECK(r.err.find("RECF n=3 seed=1") != std::string::npos);
  const auto report = slurp(ws / "out" / "report.csv");
  CHECK(report.rfind("variant,n,sparsity,seed,mae,rmse,mae_clamped,rmse_clamped,iters,seconds\n", 0) == 0);
  CHECK(fs::exists(ws / "out" / "plot_data.csv"));
  CHECK(fs::exists(ws / "out" / "traces.csv"));
  r = run({"sweep", "-q", "--config", ws.config.string(), "--out-dir", (ws / "again").string()});
  CHECK(r.code == 0);
  CHECK(slurp(ws / "again" / "report.csv") == report);
  CHECK(slurp(ws / "again" / "traces.csv") == slurp(ws / "out" / "traces.csv"));
}

TEST_CASE("embed writes vector, node and vocabulary files") {
  Workspace ws;
  const auto out = ws / "vec.txt";
  const auto r = run({"embed", "-q", "--descriptions", ws.descriptions.string(), "--out", out.string(), "--set",
                      "embedding_dim=3"});
  CHECK(r.code == 0);
  CHECK(fs::exists(out));
  CHECK(fs::exists(ws / "vec.txt.nodes"));
  CHECK(fs::exists(ws / "vec.txt.vocab"));
  CHECK(run({"train", "-q", "--config", ws.config.string(), "--embeddings", out.string(), "--model",
             (ws / "m.txt").string()})
            .code == 0);
  CHECK(slurp(ws / "m.txt").rfind("recf-model v1 30 20 3 3\n", 0) == 0);
}

TEST_CASE("exit codes") {
  Workspace ws;
  CHECK(run({}).code == 1);
  CHECK(run({"train", "--no-such-flag"}).code == 1);
  CHECK(run({"train", "--config", (ws / "missing.cfg").string()}).code == 1);
  CHECK(run({"train", "--config", ws.config.string(), "--set", "d=zero"}).code == 1);
  CHECK(run({"predict", "--model", (ws / "missing.txt").string(), "--user", "1", "--item", "2"}).code == 2);

  const auto model = ws / "model.txt";
  REQUIRE(run({"train", "-q", "--config", ws.config.string(), "--model", model.string()}).code == 0);
  auto r = run({"predict", "--model", model.string(), "--user", "nobody", "--item", "101"});
  CHECK(r.code == 2);
  CHECK(r.err.find("nobody") != std::string::npos);

  {
    std::ofstream bad(ws / "bad.dat");
    bad << "1::2::3\nthis is not a rating\n";
  }
  r = run({"train", "-q", "--ratings", (ws / "bad.dat").string(), "--model", model.string(), "--set", "d=1"});
  CHECK(r.code == 2);
  CHECK(r.err.find(":2") != std::string::npos);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("predict reads query files and can skip clamping") {
  Workspace ws;
  const auto model = ws / "model.txt";
  REQUIRE(run({"train", "-q", "--config", ws.config.string(), "--model", model.string()}).code == 0);
  {
    std::ofstream q(ws / "q.dat");
    q << "u1::101\nu2::102\n";
  }
  const auto r = run({"predict", "--model", model.string(), "--queries", (ws / "q.dat").string(), "--raw"});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("u1::101::", 0) == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 2);
}
