#include <cmath>
#include <limits>

#include "recf/error.hpp"
#include "recf/factor_model.hpp"

namespace recf::model {
namespace {

// Consecutive small-change iterations that count as one convergence under
// the mutation schedule.
constexpr int kMutationStreak = 2;

struct Problem {
  const SparseRatings& ratings;
  const SparseLabels& labels;
  const DescriptionMatrix& descriptions;
  const FitConfig& cfg;
  bool use_labels;
  bool use_descriptions;

  double value(const HybridModel& m, double lambda_C) const {
    return penalized_objective(m, ratings, labels, descriptions, use_labels ? cfg.lambda_L : 0.0,
                               use_descriptions ? lambda_C : 0.0, cfg.beta, cfg.delta);
  }

  double reduced(const HybridModel& m, double lambda_C) const {
    return objective(m, ratings, labels, descriptions, use_labels ? cfg.lambda_L : 0.0,
                     use_descriptions ? lambda_C : 0.0);
  }

  void refresh_closed_forms(HybridModel& m, double lambda_C) const {
    if (!ratings.entries.empty()) m.B_R = solve_bridge(m.U, m.V, ratings.entries, cfg.beta);
    if (use_labels) m.B_L = solve_bridge(m.U, m.V, labels.entries, cfg.beta);
    // The description subproblem is lambda_C/2 |.|^2 + delta/2 |W_C|^2, i.e. ridge delta / lambda_C.
    if (use_descriptions && lambda_C > 0.0) m.W_C = solve_projection(m.V, descriptions, cfg.delta / lambda_C);
  }
};

Matrix retract(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    if (qr.matrixQR()(j, j) < 0) q.col(j) = -q.col(j);
  }
  return q;
}

}  // namespace

FitResult fit(const SparseRatings& ratings, const SparseLabels& labels, const DescriptionMatrix& descriptions,
              const FitConfig& cfg) {
  cfg.validate();
  ratings.validate();
  if (!labels.entries.empty()) {
    labels.validate();
    if (labels.n_users != ratings.n_users || labels.n_items != ratings.n_items) {
      throw DimensionError("labels grid does not match the ratings grid");
    }
  }
  if (descriptions.present_count() > 0 && static_cast<std::size_t>(descriptions.n_items()) != ratings.n_items) {
    throw DimensionError("description matrix does not cover every item");
  }

  const Problem problem{ratings,
                        labels,
                        descriptions,
                        cfg,
                        cfg.lambda_L > 0.0 && !labels.entries.empty(),
                        cfg.lambda_C_init > 0.0 && descriptions.present_count() > 0};
  const bool two_phase = cfg.schedule == LambdaSchedule::mutation && problem.use_descriptions;

  FitResult result;
  HybridModel& m = result.model;
  m.scale = ratings.scale;

  // Step 3.0: SVD initialization, then the closed-form blocks.
  const auto& init_entries = cfg.init_source == InitSource::labels ? labels.entries : ratings.entries;
  auto factors = init_factors(init_entries, ratings.n_users, ratings.n_items, cfg.d, cfg.seed);
  result.init_from_svd = factors.from_svd;
  m.U = std::move(factors.U);
  m.V = std::move(factors.V);
  m.B_R = Matrix::Zero(cfg.d, cfg.d);
  m.B_L = Matrix::Zero(cfg.d, cfg.d);
  m.W_C = Matrix::Zero(cfg.d, descriptions.dim());

  bool first_seen = false;
  double lambda_C = lambda_schedule(cfg.schedule, cfg.lambda_C_init, cfg.step_k, 1, first_seen);
  problem.refresh_closed_forms(m, lambda_C);
  result.initial_penalized = problem.value(m, lambda_C);

  int streak = 0;
  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    lambda_C = problem.use_descriptions ? lambda_schedule(cfg.schedule, cfg.lambda_C_init, cfg.step_k, iter, first_seen)
                                        : 0.0;
    const double lambda_L = problem.use_labels ? cfg.lambda_L : 0.0;
    const double before = problem.value(m, lambda_C);
    bool step_failed = false;

    // Step 3.1: V.
    {
      const Matrix g = grad_V(m, ratings, labels, descriptions, lambda_L, lambda_C);
      if (cfg.backtracking) {
        auto eval = [&](const Matrix& candidate) {
          HybridModel trial = m;
          trial.V = candidate;
          return problem.value(trial, lambda_C);
        };
        auto step = backtracking_update(m.V, g, cfg.gamma_V, before, eval);
        step_failed = step_failed || !step.accepted;
        m.V = std::move(step.value);
      } else {
        m.V = update_factor(m.V, g, cfg.gamma_V);
      }
    }
    // Step 3.2: U.
    {
      const Matrix g = grad_U(m, ratings, labels, lambda_L);
      if (cfg.backtracking) {
        const double current = problem.value(m, lambda_C);
        auto eval = [&](const Matrix& candidate) {
          HybridModel trial = m;
          trial.U = candidate;
          return problem.value(trial, lambda_C);
        };
        auto step = backtracking_update(m.U, g, cfg.gamma_U, current, eval);
        step_failed = step_failed || !step.accepted;
        m.U = std::move(step.value);
      } else {
        m.U = update_factor(m.U, g, cfg.gamma_U);
      }
    }
    if (cfg.qr_retraction) {
      m.U = retract(m.U);
      m.V = retract(m.V);
    }
    // Step 3.3: closed forms.
    problem.refresh_closed_forms(m, lambda_C);

    const double after = problem.value(m, lambda_C);
    if (!std::isfinite(after)) throw DataError("fit diverged: objective is not finite at iteration " + std::to_string(iter));
    const double scale = std::max(std::abs(before), std::numeric_limits<double>::min());
    const double change = std::abs(before - after) / scale;
    result.trace.push_back({iter, lambda_C, problem.reduced(m, lambda_C), after, change, step_failed});

    const bool small = change < cfg.tol || std::isinf(cfg.tol);
    if (!two_phase) {
      if (small || step_failed) {
        result.converged = true;
        break;
      }
      continue;
    }
    streak = small ? streak + 1 : 0;
    if (streak >= kMutationStreak || step_failed) {
      streak = 0;
      if (!first_seen) {
        first_seen = true;
        result.first_convergence = iter;
      } else {
        result.converged = true;
        break;
      }
    }
  }
  return result;
}

}  // namespace recf::model
