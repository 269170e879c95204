#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "recf/embeddings.hpp"

namespace recf::model {

using Matrix = Eigen::MatrixXd;
using embed::DescriptionMatrix;

/// One observed cell of a sparse user x item matrix.
struct Entry {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  double value = 0.0;

  friend bool operator==(const Entry&, const Entry&) = default;
};

struct RatingScale {
  double min = 1.0;
  double max = 5.0;

  bool contains(double score) const noexcept { return score >= min && score <= max; }
  double clamp(double score) const noexcept { return score < min ? min : (score > max ? max : score); }

  friend bool operator==(const RatingScale&, const RatingScale&) = default;
};

/// Observed ratings over an N x M grid; cells not listed are unknown.
struct SparseRatings {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::vector<Entry> entries;
  RatingScale scale;

  /// Throws DataError on out-of-range indices, duplicate cells or
  /// scores outside the scale.
  void validate() const;
  double density() const noexcept;
};

/// Observed like (1) / dislike (0) labels over an N x M grid.
struct SparseLabels {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::vector<Entry> entries;

  void validate() const;
};

struct HybridModel {
  Matrix U;    // N x d
  Matrix V;    // M x d
  Matrix B_R;  // d x d
  Matrix B_L;  // d x d
  Matrix W_C;  // d x e
  RatingScale scale;

  Eigen::Index n_users() const noexcept { return U.rows(); }
  Eigen::Index n_items() const noexcept { return V.rows(); }
  Eigen::Index rank() const noexcept { return U.cols(); }
  Eigen::Index description_dim() const noexcept { return W_C.cols(); }

  /// Throws DimensionError unless all blocks agree and every entry is finite.
  void validate() const;
};

enum class LambdaSchedule { linear, nonlinear, mutation };

std::string_view to_string(LambdaSchedule kind);
LambdaSchedule parse_schedule(std::string_view name);

/// Which observed matrix seeds the SVD initialization.
enum class InitSource { labels, ratings };

/// Fitting hyperparameters.
///
/// The Gaussian precisions of the generative model (alpha on ratings and
/// labels, xi on descriptions, theta on the factor priors) do not appear
/// separately: they are folded into lambda_L, the lambda_C schedule, beta
/// and delta of the reduced least-squares objective.
struct FitConfig {
  int d = 10;
  double lambda_L = 0.2;
  double lambda_C_init = 2.5;  // m
  LambdaSchedule schedule = LambdaSchedule::mutation;
  double step_k = 0.5;         // linear decline step
  double beta = 0.01;          // ridge on B_R and B_L
  double delta = 0.01;         // ridge on W_C
  double gamma_U = 0.001;
  double gamma_V = 0.001;
  bool backtracking = true;
  bool qr_retraction = false;
  int max_iter = 200;
  double tol = 1e-4;
  std::uint64_t seed = 1;
  InitSource init_source = InitSource::labels;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Objective and gradients

/// f = 1/2 |X o (R - U B_R V^T)|^2 + lambda_L/2 |Y o (L - U B_L V^T)|^2
///   + lambda_C/2 |Z o (C - V W_C)|^2
/// The description term is skipped entirely when lambda_C is zero.
double objective(const HybridModel& model, const SparseRatings& ratings, const SparseLabels& labels,
                 const DescriptionMatrix& descriptions, double lambda_L, double lambda_C);

/// objective() plus the ridge terms the closed-form steps minimize:
/// beta/2 |B_R|^2 + lambda_L beta/2 |B_L|^2 + delta/2 |W_C|^2 (the last only
/// while lambda_C > 0). This is what fit() descends on.
double penalized_objective(const HybridModel& model, const SparseRatings& ratings, const SparseLabels& labels,
                           const DescriptionMatrix& descriptions, double lambda_L, double lambda_C, double beta,
                           double delta);

Matrix grad_U(const HybridModel& model, const SparseRatings& ratings, const SparseLabels& labels, double lambda_L);

Matrix grad_V(const HybridModel& model, const SparseRatings& ratings, const SparseLabels& labels,
              const DescriptionMatrix& descriptions, double lambda_L, double lambda_C);

// ---------------------------------------------------------------------------
// Updates

/// Plain gradient step: current - gamma * grad.
Matrix update_factor(const Matrix& current, const Matrix& grad, double gamma);

struct StepOutcome {
  Matrix value;
  double gamma = 0.0;
  double objective = 0.0;
  bool accepted = false;
};

/// Gradient step with step halving: tries gamma, gamma/2, ... (at most
/// max_halvings halvings) and accepts the first candidate whose objective
/// does not exceed current_objective. On failure value == current.
template <typename Objective>
StepOutcome backtracking_update(const Matrix& current, const Matrix& grad, double gamma, double current_objective,
                                Objective&& evaluate, int max_halvings = 20) {
  for (int halvings = 0; halvings <= max_halvings; ++halvings, gamma *= 0.5) {
    Matrix candidate = update_factor(current, grad, gamma);
    const double value = evaluate(candidate);
    if (value <= current_objective) return {std::move(candidate), gamma, value, true};
  }
  return {current, 0.0, current_objective, false};
}

/// Ridge solution for a bridge matrix:
/// argmin_B 1/2 sum (value - U_u B V_v^T)^2 + beta/2 |B|_F^2
/// via vec(B) = (M^T M + beta I)^{-1} M^T r with rows vec(U_u^T V_v).
Matrix solve_bridge(const Matrix& U, const Matrix& V, std::span<const Entry> observed, double beta);

/// W_C = (V~^T V~ + delta I)^{-1} V~^T C~ over items with a description.
Matrix solve_projection(const Matrix& V, const DescriptionMatrix& descriptions, double delta);

/// lambda_C at a 1-based iteration.
double lambda_schedule(LambdaSchedule kind, double m, double k, int iter, bool first_convergence_seen);

struct Factors {
  Matrix U;
  Matrix V;
  bool from_svd = false;
};

/// Top-d singular vectors of the zero-filled observed matrix. Falls back to
/// seeded random orthonormal factors when the matrix has no non-zero cell.
Factors init_factors(std::span<const Entry> observed, std::size_t n_users, std::size_t n_items, int d,
                     std::uint64_t seed);

inline Factors init_factors(const SparseLabels& labels, int d, std::uint64_t seed) {
  return init_factors(labels.entries, labels.n_users, labels.n_items, d, seed);
}

// ---------------------------------------------------------------------------
// Fitting

struct TraceRecord {
  int iter = 0;
  double lambda_C = 0.0;
  double objective = 0.0;   // reduced objective at this lambda_C
  double penalized = 0.0;   // what the iteration descends on
  double relative_change = 0.0;
  bool step_failed = false;
};

struct FitResult {
  HybridModel model;
  std::vector<TraceRecord> trace;
  /// Penalized objective after initialization, at the first iteration's lambda_C.
  double initial_penalized = 0.0;
  /// Iteration at which the first convergence was detected, if any.
  std::optional<int> first_convergence;
  bool converged = false;
  bool init_from_svd = false;

  int iterations() const noexcept { return static_cast<int>(trace.size()); }
};

/// Alternating fit: SVD init, closed-form bridges and projection, then
/// repeated (V step, U step, closed-form refresh) until convergence or
/// max_iter. Under the mutation schedule the first convergence switches
/// lambda_C to zero and fitting continues to a second convergence.
FitResult fit(const SparseRatings& ratings, const SparseLabels& labels, const DescriptionMatrix& descriptions,
              const FitConfig& cfg);

// ---------------------------------------------------------------------------
// Prediction

/// Dense U B_R V^T, unclamped.
Matrix predict(const HybridModel& model);

/// U_u B_R V_v^T, unclamped. Throws DataError for out-of-range indices.
double predict_one(const HybridModel& model, std::size_t user, std::size_t item);

inline double predict_clamped(const HybridModel& model, std::size_t user, std::size_t item) {
  return model.scale.clamp(predict_one(model, user, item));
}

}  // namespace recf::model
