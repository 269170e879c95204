#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "recf/error.hpp"
#include "recf/factor_model.hpp"
#include "support/instances.hpp"
#include "support/planted.hpp"

using namespace recf;
using model::Entry;
using Eigen::MatrixXd;

namespace {

struct Planted {
  MatrixXd truth;
  std::vector<Entry> train;
  std::vector<Entry> held_out;
};

/// Exact rank-r matrix U* B* V*^T with a fraction of cells held out.
Planted planted_low_rank(std::size_t N, std::size_t M, int r, double keep, std::uint64_t seed) {
  Rng rng(seed);
  const MatrixXd U = testing::random_matrix(static_cast<Eigen::Index>(N), r, rng);
  const MatrixXd V = testing::random_matrix(static_cast<Eigen::Index>(M), r, rng);
  const MatrixXd B = testing::random_matrix(r, r, rng);
  Planted p;
  p.truth = U * B * V.transpose();
  for (std::uint32_t u = 0; u < N; ++u) {
    for (std::uint32_t v = 0; v < M; ++v) {
      auto& bucket = uniform01(rng) < keep ? p.train : p.held_out;
      bucket.push_back({u, v, p.truth(u, v)});
    }
  }
  return p;
}

model::SparseRatings as_ratings(std::vector<Entry> entries, std::size_t N, std::size_t M) {
  model::SparseRatings r;
  r.n_users = N;
  r.n_items = M;
  r.entries = std::move(entries);
  r.scale = {-1e9, 1e9};
  return r;
}

model::SparseLabels no_labels(std::size_t N, std::size_t M) { return {N, M, {}}; }

}  // namespace

TEST_CASE("fully observed planted ratings are fitted exactly") {
  const auto p = planted_low_rank(10, 8, 2, 1.0, 3);
  const auto r = as_ratings(p.train, 10, 8);
  model::FitConfig cfg;
  cfg.d = 2;
  cfg.lambda_L = 0.0;
  cfg.lambda_C_init = 0.0;
  cfg.beta = 0.0;
  cfg.init_source = model::InitSource::ratings;
  const auto res = model::fit(r, no_labels(10, 8), embed::DescriptionMatrix::empty(8), cfg);
  CHECK(res.init_from_svd);
  CHECK(res.trace.back().objective < 1e-6);
}

TEST_CASE("partially observed planted ratings are recovered on held-out cells") {
  const auto p = planted_low_rank(14, 12, 2, 0.8, 5);
  const auto r = as_ratings(p.train, 14, 12);
  model::FitConfig cfg;
  cfg.d = 2;
  cfg.lambda_L = 0.0;
  cfg.lambda_C_init = 0.0;
  cfg.beta = 0.0;
  cfg.gamma_U = cfg.gamma_V = 0.5;
  cfg.tol = 0.0;
  cfg.max_iter = 3000;
  cfg.init_source = model::InitSource::ratings;
  const auto res = model::fit(r, no_labels(14, 12), embed::DescriptionMatrix::empty(12), cfg);
  double worst = 0.0;
  for (const auto& e : p.held_out) worst = std::max(worst, std::abs(model::predict_one(res.model, e.user, e.item) - e.value));
  CHECK(worst < 1e-3);
}

TEST_CASE("infinite tolerance stops after one iteration") {
  const auto inst = testing::random_instance(6, 5, 2, 3, 4);
  model::FitConfig cfg;
  cfg.d = 2;
  cfg.tol = std::numeric_limits<double>::infinity();
  for (auto schedule : {model::LambdaSchedule::linear, model::LambdaSchedule::nonlinear}) {
    cfg.schedule = schedule;
    const auto res = model::fit(inst.ratings, inst.labels, inst.descriptions, cfg);
    CHECK(res.iterations() == 1);
    CHECK(res.converged);
  }
  cfg.schedule = model::LambdaSchedule::mutation;
  const auto plain = model::fit(inst.ratings, inst.labels, embed::DescriptionMatrix::empty(5), cfg);
  CHECK(plain.iterations() == 1);
}

TEST_CASE("mutation schedule holds lambda_C then drops it to zero") {
  const auto data = testing::make_planted({.users = 30, .items = 24, .density = 0.4, .seed = 3});
  Rng rng(1);
  auto c = embed::DescriptionMatrix::empty(24, 4);
  for (Eigen::Index v = 0; v < 24; ++v) {
    c.present[static_cast<std::size_t>(v)] = 1;
    for (Eigen::Index k = 0; k < 4; ++k) c.rows(v, k) = data.cluster[static_cast<std::size_t>(v)] == k ? 1.0 : 0.1 * normal(rng);
  }
  model::FitConfig cfg;
  cfg.d = 3;
  cfg.tol = 1e-3;
  cfg.max_iter = 2000;
  cfg.gamma_U = cfg.gamma_V = 0.01;
  const model::SparseLabels labels{30, 24, {}};
  const auto res = model::fit(data.ratings, labels, c, cfg);
  REQUIRE(res.first_convergence.has_value());
  const int switch_at = *res.first_convergence;
  CHECK(switch_at < res.iterations());
  for (const auto& t : res.trace) CHECK(t.lambda_C == (t.iter <= switch_at ? 2.5 : 0.0));
}

TEST_CASE("linear and nonlinear schedules follow their formulas in the trace") {
  const auto inst = testing::random_instance(6, 5, 2, 3, 12);
  model::FitConfig cfg;
  cfg.d = 2;
  cfg.tol = 0.0;
  cfg.max_iter = 8;
  cfg.schedule = model::LambdaSchedule::linear;
  auto res = model::fit(inst.ratings, inst.labels, inst.descriptions, cfg);
  for (const auto& t : res.trace) CHECK(t.lambda_C == model::lambda_schedule(cfg.schedule, 2.5, 0.5, t.iter, false));
  cfg.schedule = model::LambdaSchedule::nonlinear;
  res = model::fit(inst.ratings, inst.labels, inst.descriptions, cfg);
  for (const auto& t : res.trace) CHECK(t.lambda_C == doctest::Approx(2.5 / t.iter));
}

TEST_CASE("backtracking never increases the penalized objective at fixed lambda_C") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto inst = testing::random_instance(8, 7, 3, 3, 300 + seed);
    model::FitConfig cfg;
    cfg.d = 3;
    cfg.tol = 0.0;
    cfg.max_iter = 40;
    cfg.gamma_U = cfg.gamma_V = 1.0;
    const auto res = model::fit(inst.ratings, inst.labels, inst.descriptions, cfg);
    double prev = res.initial_penalized;
    for (const auto& t : res.trace) {
      CHECK(t.lambda_C == 2.5);
      CHECK(t.penalized <= prev + 1e-10);
      prev = t.penalized;
    }
  }
}

TEST_CASE("fit is deterministic") {
  const auto inst = testing::random_instance(7, 6, 2, 3, 21);
  model::FitConfig cfg;
  cfg.d = 2;
  cfg.max_iter = 30;
  const auto a = model::fit(inst.ratings, inst.labels, inst.descriptions, cfg);
  const auto b = model::fit(inst.ratings, inst.labels, inst.descriptions, cfg);
  CHECK(a.model.U == b.model.U);
  CHECK(a.model.V == b.model.V);
  CHECK(a.model.B_R == b.model.B_R);
  CHECK(a.model.W_C == b.model.W_C);
}

TEST_CASE("missing description rows do not affect the fit") {
  auto inst = testing::random_instance(7, 6, 2, 3, 22, 0.6, 0.5);
  model::FitConfig cfg;
  cfg.d = 2;
  cfg.max_iter = 25;
  const auto a = model::fit(inst.ratings, inst.labels, inst.descriptions, cfg);
  for (Eigen::Index v = 0; v < 6; ++v) {
    if (!inst.descriptions.present[static_cast<std::size_t>(v)]) inst.descriptions.rows.row(v).setConstant(-42.0);
  }
  const auto b = model::fit(inst.ratings, inst.labels, inst.descriptions, cfg);
  CHECK(a.model.V == b.model.V);
  CHECK(a.model.W_C == b.model.W_C);
}

TEST_CASE("relabeling items permutes predictions") {
  const auto inst = testing::random_instance(8, 6, 2, 3, 23, 0.7, 0.8);
  const std::vector<std::uint32_t> perm{3, 0, 5, 1, 4, 2};  // old item -> new item
  auto ratings = inst.ratings;
  auto labels = inst.labels;
  auto desc = inst.descriptions;
  for (auto& e : ratings.entries) e.item = perm[e.item];
  for (auto& e : labels.entries) e.item = perm[e.item];
  for (std::size_t v = 0; v < 6; ++v) {
    desc.rows.row(perm[v]) = inst.descriptions.rows.row(static_cast<Eigen::Index>(v));
    desc.present[perm[v]] = inst.descriptions.present[v];
  }
  model::FitConfig cfg;
  cfg.d = 2;
  cfg.max_iter = 15;
  const auto a = model::predict(model::fit(inst.ratings, inst.labels, inst.descriptions, cfg).model);
  const auto b = model::predict(model::fit(ratings, labels, desc, cfg).model);
  double worst = 0.0;
  for (Eigen::Index u = 0; u < 8; ++u) {
    for (Eigen::Index v = 0; v < 6; ++v) worst = std::max(worst, std::abs(a(u, v) - b(u, perm[static_cast<std::size_t>(v)])));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("fit rejects inconsistent inputs") {
  const auto inst = testing::random_instance(5, 4, 2, 3, 5);
  model::FitConfig cfg;
  cfg.d = 2;
  model::SparseLabels wrong{6, 4, {{5, 0, 1.0}}};
  CHECK_THROWS_AS(model::fit(inst.ratings, wrong, inst.descriptions, cfg), DimensionError);
  cfg.d = 9;
  CHECK_THROWS_AS(model::fit(inst.ratings, inst.labels, inst.descriptions, cfg), DimensionError);
  auto bad = inst.ratings;
  bad.entries.push_back(bad.entries.front());
  cfg.d = 2;
  CHECK_THROWS_AS(model::fit(bad, inst.labels, inst.descriptions, cfg), DataError);
}

TEST_CASE("prediction with identity factors") {
  model::HybridModel m;
  m.U = m.V = m.B_R = MatrixXd::Identity(3, 3);
  m.B_L = MatrixXd::Zero(3, 3);
  m.W_C = MatrixXd::Zero(3, 0);
  CHECK(model::predict(m) == MatrixXd::Identity(3, 3));
}

TEST_CASE("predict_one agrees bit for bit with predict") {
  const auto inst = testing::random_instance(9, 7, 3, 2, 6);
  const MatrixXd all = model::predict(inst.model);
  for (Eigen::Index u = 0; u < 9; ++u) {
    for (Eigen::Index v = 0; v < 7; ++v) {
      CHECK(model::predict_one(inst.model, static_cast<std::size_t>(u), static_cast<std::size_t>(v)) == all(u, v));
    }
  }
  CHECK_THROWS_AS(model::predict_one(inst.model, 9, 0), DataError);
  CHECK_THROWS_AS(model::predict_one(inst.model, 0, 7), DataError);
}

TEST_CASE("clamped prediction stays on the scale") {
  model::HybridModel m;
  m.U = m.V = MatrixXd::Identity(2, 2);
  m.B_R = MatrixXd::Zero(2, 2);
  m.B_R(0, 0) = 5.7;
  m.B_R(1, 1) = 0.2;
  m.B_L = MatrixXd::Zero(2, 2);
  m.W_C = MatrixXd::Zero(2, 0);
  CHECK(model::predict_one(m, 0, 0) == 5.7);
  CHECK(model::predict_clamped(m, 0, 0) == 5.0);
  CHECK(model::predict_clamped(m, 1, 1) == 1.0);
  CHECK(model::predict_clamped(m, 0, 1) == 1.0);
}
