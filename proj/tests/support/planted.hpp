#pragma once

// Synthetic data with known structure: low-rank ratings whose item factors
// cluster, and item descriptions drawn from per-cluster vocabularies.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "recf/embeddings.hpp"
#include "recf/factor_model.hpp"
#include "recf/random.hpp"

namespace recf::testing {

struct PlantedConfig {
  std::size_t users = 200;
  std::size_t items = 150;
  int rank = 3;
  int clusters = 6;
  double item_noise = 0.15;    // spread of item factors around their centroid
  double rating_noise = 0.0;   // additive Gaussian noise on scores
  double density = 0.5;        // fraction of cells kept
  int words_per_cluster = 8;
  int tags_per_item = 4;
  std::uint64_t seed = 7;
};

struct PlantedData {
  model::SparseRatings ratings;
  Eigen::MatrixXd truth;                 // full clipped score matrix
  std::vector<int> cluster;              // per item
  std::vector<text::TokenList> descriptions;
};

inline PlantedData make_planted(const PlantedConfig& cfg) {
  Rng rng(cfg.seed);
  const auto N = static_cast<Eigen::Index>(cfg.users);
  const auto M = static_cast<Eigen::Index>(cfg.items);
  const auto r = static_cast<Eigen::Index>(cfg.rank);

  Eigen::MatrixXd centroids(cfg.clusters, r);
  for (Eigen::Index i = 0; i < centroids.size(); ++i) centroids.data()[i] = normal(rng);
  Eigen::MatrixXd U(N, r), V(M, r);
  for (Eigen::Index i = 0; i < U.size(); ++i) U.data()[i] = normal(rng);

  PlantedData out;
  out.cluster.resize(cfg.items);
  for (Eigen::Index v = 0; v < M; ++v) {
    const int c = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.clusters)));
    out.cluster[static_cast<std::size_t>(v)] = c;
    for (Eigen::Index j = 0; j < r; ++j) V(v, j) = centroids(c, j) + cfg.item_noise * normal(rng);
  }

  const Eigen::MatrixXd raw = U * V.transpose();
  const double sd = std::sqrt(raw.squaredNorm() / static_cast<double>(raw.size()));
  out.truth = ((raw / sd).array() + 3.0).cwiseMax(1.0).cwiseMin(5.0).matrix();

  out.ratings.n_users = cfg.users;
  out.ratings.n_items = cfg.items;
  for (Eigen::Index u = 0; u < N; ++u) {
    for (Eigen::Index v = 0; v < M; ++v) {
      if (uniform01(rng) >= cfg.density) continue;
      double value = out.truth(u, v);
      if (cfg.rating_noise > 0.0) value = std::clamp(value + cfg.rating_noise * normal(rng), 1.0, 5.0);
      out.ratings.entries.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v), value});
    }
  }

  out.descriptions.resize(cfg.items);
  for (std::size_t v = 0; v < cfg.items; ++v) {
    for (int t = 0; t < cfg.tags_per_item; ++t) {
      const auto w = uniform_index(rng, static_cast<std::uint64_t>(cfg.words_per_cluster));
      out.descriptions[v].push_back("c" + std::to_string(out.cluster[v]) + "w" + std::to_string(w));
    }
  }
  return out;
}

}  // namespace recf::testing
