#include "recf/factor_model.hpp"

#include <cmath>
#include <set>
#include <utility>

#include "recf/error.hpp"
#include "recf/random.hpp"

namespace recf::model {
namespace {

void validate_entries(const std::vector<Entry>& entries, std::size_t n_users, std::size_t n_items,
                      const char* what) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (const auto& e : entries) {
    if (e.user >= n_users || e.item >= n_items) {
      throw DataError(std::string(what) + " entry (" + std::to_string(e.user) + ", " + std::to_string(e.item) +
                      ") is outside the " + std::to_string(n_users) + " x " + std::to_string(n_items) + " grid");
    }
    if (!std::isfinite(e.value)) throw DataError(std::string(what) + " entry holds a non-finite value");
    if (!seen.emplace(e.user, e.item).second) {
      throw DataError(std::string(what) + " cell (" + std::to_string(e.user) + ", " + std::to_string(e.item) +
                      ") appears twice");
    }
  }
}

void check_data(const HybridModel& model, const SparseRatings& ratings, const SparseLabels& labels) {
  const auto d = model.rank();
  if (model.V.cols() != d || model.B_R.rows() != d || model.B_R.cols() != d || model.B_L.rows() != d ||
      model.B_L.cols() != d || model.W_C.rows() != d) {
    throw DimensionError("model blocks disagree on the latent dimension");
  }
  const auto n = static_cast<std::size_t>(model.n_users());
  const auto m = static_cast<std::size_t>(model.n_items());
  if (ratings.n_users != n || ratings.n_items != m) throw DimensionError("ratings grid does not match the model");
  if (!labels.entries.empty() && (labels.n_users != n || labels.n_items != m)) {
    throw DimensionError("labels grid does not match the model");
  }
  for (const auto* entries : {&ratings.entries, &labels.entries}) {
    for (const auto& e : *entries) {
      if (e.user >= n || e.item >= m) throw DataError("observed cell outside the grid");
    }
  }
}

void check_descriptions(const HybridModel& model, const DescriptionMatrix& c) {
  if (c.n_items() != model.n_items() || c.present.size() != static_cast<std::size_t>(c.n_items())) {
    throw DimensionError("description matrix does not cover every item");
  }
  if (c.dim() != model.description_dim()) throw DimensionError("description width does not match W_C");
}

// Row u of U * B computed in a fixed order so every caller agrees bit for bit.
Eigen::RowVectorXd left_product(const Matrix& U, const Matrix& B, Eigen::Index u) {
  const auto d = B.rows();
  Eigen::RowVectorXd out(B.cols());
  for (Eigen::Index j = 0; j < B.cols(); ++j) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) s += U(u, i) * B(i, j);
    out(j) = s;
  }
  return out;
}

double fixed_dot(const Eigen::RowVectorXd& a, const Matrix& V, Eigen::Index v) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < a.size(); ++j) s += a(j) * V(v, j);
  return s;
}

double squared_residual_sum(const Matrix& UB, const Matrix& V, const std::vector<Entry>& entries) {
  double total = 0.0;
  for (const auto& e : entries) {
    const double r = e.value - UB.row(e.user).dot(V.row(e.item));
    total += r * r;
  }
  return total;
}

double description_residual_sum(const HybridModel& model, const DescriptionMatrix& c) {
  double total = 0.0;
  for (Eigen::Index v = 0; v < c.n_items(); ++v) {
    if (!c.present[static_cast<std::size_t>(v)]) continue;
    total += (c.rows.row(v) - model.V.row(v) * model.W_C).squaredNorm();
  }
  return total;
}

// Accumulates -res * (grad of U_u B V_v^T) into the user and item gradients.
void accumulate_pair_gradient(const Matrix& U, const Matrix& V, const Matrix& B, const std::vector<Entry>& entries,
                              double weight, Matrix* gU, Matrix* gV) {
  if (entries.empty() || weight == 0.0) return;
  const Matrix UB = U * B;
  const Matrix VBt = V * B.transpose();
  for (const auto& e : entries) {
    const double res = e.value - UB.row(e.user).dot(V.row(e.item));
    if (gU) gU->row(e.user) -= weight * res * VBt.row(e.item);
    if (gV) gV->row(e.item) -= weight * res * UB.row(e.user);
  }
}

Matrix solve_normal_equations(const Matrix& gram, const Matrix& rhs, double ridge, const char* what) {
  Matrix system = gram;
  system.diagonal().array() += ridge;
  if (ridge > 0.0) {
    Eigen::LLT<Matrix> llt(system);
    if (llt.info() == Eigen::Success) return llt.solve(rhs);
  }
  Eigen::FullPivLU<Matrix> lu(system);
  if (!lu.isInvertible()) throw SingularSystemError(std::string(what) + ": normal equations are singular");
  return lu.solve(rhs);
}

Matrix orthonormal_columns(const Matrix& a) {
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
  // Fix column signs so R has a non-negative diagonal.
  const Matrix r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  return q;
}

}  // namespace

void SparseRatings::validate() const {
  validate_entries(entries, n_users, n_items, "rating");
  if (!(scale.min <= scale.max)) throw DataError("rating scale minimum exceeds maximum");
  for (const auto& e : entries) {
    if (!scale.contains(e.value)) {
      throw DataError("rating " + std::to_string(e.value) + " is outside the scale [" + std::to_string(scale.min) +
                      ", " + std::to_string(scale.max) + "]");
    }
  }
}

double SparseRatings::density() const noexcept {
  const double cells = static_cast<double>(n_users) * static_cast<double>(n_items);
  return cells > 0 ? static_cast<double>(entries.size()) / cells : 0.0;
}

void SparseLabels::validate() const {
  validate_entries(entries, n_users, n_items, "label");
  for (const auto& e : entries) {
    if (e.value != 0.0 && e.value != 1.0) throw DataError("labels must be 0 or 1");
  }
}

void HybridModel::validate() const {
  const auto d = rank();
  if (V.cols() != d || B_R.rows() != d || B_R.cols() != d || B_L.rows() != d || B_L.cols() != d ||
      W_C.rows() != d) {
    throw DimensionError("model blocks disagree on the latent dimension");
  }
  for (const Matrix* m : {&U, &V, &B_R, &B_L, &W_C}) {
    if (!m->allFinite()) throw DataError("model holds non-finite values");
  }
}

std::string_view to_string(LambdaSchedule kind) {
  switch (kind) {
    case LambdaSchedule::linear: return "linear";
    case LambdaSchedule::nonlinear: return "nonlinear";
    case LambdaSchedule::mutation: return "mutation";
  }
  return "mutation";
}

LambdaSchedule parse_schedule(std::string_view name) {
  if (name == "linear") return LambdaSchedule::linear;
  if (name == "nonlinear") return LambdaSchedule::nonlinear;
  if (name == "mutation") return LambdaSchedule::mutation;
  throw ConfigError("unknown lambda schedule '" + std::string(name) + "'");
}

void FitConfig::validate() const {
  if (d < 1) throw ConfigError("d must be >= 1");
  if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
  for (double w : {lambda_L, lambda_C_init, beta, delta, gamma_U, gamma_V}) {
    if (!(w >= 0.0)) throw ConfigError("weights and step sizes must be non-negative");
  }
  if (schedule == LambdaSchedule::linear && !(step_k > 0.0)) throw ConfigError("linear schedule needs step_k > 0");
  if (!(tol >= 0.0)) throw ConfigError("tol must be non-negative");
}

double objective(const HybridModel& model, const SparseRatings& ratings, const SparseLabels& labels,
                 const DescriptionMatrix& descriptions, double lambda_L, double lambda_C) {
  check_data(model, ratings, labels);
  double total = 0.5 * squared_residual_sum(model.U * model.B_R, model.V, ratings.entries);
  if (lambda_L != 0.0 && !labels.entries.empty()) {
    total += 0.5 * lambda_L * squared_residual_sum(model.U * model.B_L, model.V, labels.entries);
  }
  if (lambda_C != 0.0) {
    check_descriptions(model, descriptions);
    total += 0.5 * lambda_C * description_residual_sum(model, descriptions);
  }
  return total;
}

double penalized_objective(const HybridModel& model, const SparseRatings& ratings, const SparseLabels& labels,
                           const DescriptionMatrix& descriptions, double lambda_L, double lambda_C, double beta,
                           double delta) {
  double total = objective(model, ratings, labels, descriptions, lambda_L, lambda_C);
  total += 0.5 * beta * model.B_R.squaredNorm();
  if (lambda_L != 0.0 && !labels.entries.empty()) total += 0.5 * lambda_L * beta * model.B_L.squaredNorm();
  if (lambda_C != 0.0) total += 0.5 * delta * model.W_C.squaredNorm();
  return total;
}

Matrix grad_U(const HybridModel& model, const SparseRatings& ratings, const SparseLabels& labels, double lambda_L) {
  check_data(model, ratings, labels);
  Matrix g = Matrix::Zero(model.U.rows(), model.U.cols());
  accumulate_pair_gradient(model.U, model.V, model.B_R, ratings.entries, 1.0, &g, nullptr);
  accumulate_pair_gradient(model.U, model.V, model.B_L, labels.entries, lambda_L, &g, nullptr);
  return g;
}

Matrix grad_V(const HybridModel& model, const SparseRatings& ratings, const SparseLabels& labels,
              const DescriptionMatrix& descriptions, double lambda_L, double lambda_C) {
  check_data(model, ratings, labels);
  Matrix g = Matrix::Zero(model.V.rows(), model.V.cols());
  accumulate_pair_gradient(model.U, model.V, model.B_R, ratings.entries, 1.0, nullptr, &g);
  accumulate_pair_gradient(model.U, model.V, model.B_L, labels.entries, lambda_L, nullptr, &g);
  if (lambda_C != 0.0) {
    check_descriptions(model, descriptions);
    const Matrix Wt = model.W_C.transpose();
    for (Eigen::Index v = 0; v < descriptions.n_items(); ++v) {
      if (!descriptions.present[static_cast<std::size_t>(v)]) continue;
      g.row(v) -= lambda_C * (descriptions.rows.row(v) - model.V.row(v) * model.W_C) * Wt;
    }
  }
  return g;
}

Matrix update_factor(const Matrix& current, const Matrix& grad, double gamma) {
  if (current.rows() != grad.rows() || current.cols() != grad.cols()) {
    throw DimensionError("gradient shape does not match the factor");
  }
  return current - gamma * grad;
}

Matrix solve_bridge(const Matrix& U, const Matrix& V, std::span<const Entry> observed, double beta) {
  if (observed.empty()) throw DataError("bridge solve needs at least one observed cell");
  if (U.cols() != V.cols()) throw DimensionError("U and V disagree on the latent dimension");
  if (!(beta >= 0.0)) throw ConfigError("beta must be non-negative");
  const Eigen::Index d = U.cols();
  const Eigen::Index dd = d * d;

  // M^T M = sum_u (sum_{v in obs(u)} V_v^T V_v) kron (U_u^T U_u), grouping cells by user.
  std::vector<Matrix> item_gram(static_cast<std::size_t>(U.rows()));
  std::vector<std::uint8_t> touched(static_cast<std::size_t>(U.rows()), 0);
  Matrix rhs_block = Matrix::Zero(d, d);  // sum value * U_u^T V_v
  for (const auto& e : observed) {
    if (e.user >= U.rows() || e.item >= V.rows()) throw DataError("observed cell outside the factor matrices");
    auto& g = item_gram[e.user];
    if (!touched[e.user]) {
      g = Matrix::Zero(d, d);
      touched[e.user] = 1;
    }
    g.noalias() += V.row(e.item).transpose() * V.row(e.item);
    rhs_block.noalias() += e.value * U.row(e.user).transpose() * V.row(e.item);
  }

  Matrix gram = Matrix::Zero(dd, dd);
  for (Eigen::Index u = 0; u < U.rows(); ++u) {
    if (!touched[static_cast<std::size_t>(u)]) continue;
    const Matrix user_outer = U.row(u).transpose() * U.row(u);
    const auto& g = item_gram[static_cast<std::size_t>(u)];
    for (Eigen::Index a = 0; a < d; ++a) {
      for (Eigen::Index b = 0; b < d; ++b) gram.block(a * d, b * d, d, d) += g(a, b) * user_outer;
    }
  }
  const Eigen::VectorXd rhs = rhs_block.reshaped();  // column-major vec
  const Eigen::VectorXd solution = solve_normal_equations(gram, rhs, beta, "bridge");
  return solution.reshaped(d, d);
}

Matrix solve_projection(const Matrix& V, const DescriptionMatrix& descriptions, double delta) {
  if (descriptions.n_items() != V.rows()) throw DimensionError("description matrix does not cover every item");
  if (!(delta >= 0.0)) throw ConfigError("delta must be non-negative");
  const Eigen::Index d = V.cols();
  Matrix gram = Matrix::Zero(d, d);
  Matrix rhs = Matrix::Zero(d, descriptions.dim());
  std::size_t present = 0;
  for (Eigen::Index v = 0; v < V.rows(); ++v) {
    if (!descriptions.present[static_cast<std::size_t>(v)]) continue;
    ++present;
    gram.noalias() += V.row(v).transpose() * V.row(v);
    rhs.noalias() += V.row(v).transpose() * descriptions.rows.row(v);
  }
  if (present == 0) throw DataError("projection solve needs at least one item description");
  return solve_normal_equations(gram, rhs, delta, "projection");
}

double lambda_schedule(LambdaSchedule kind, double m, double k, int iter, bool first_convergence_seen) {
  if (iter < 1) throw ConfigError("iterations are counted from 1");
  switch (kind) {
    case LambdaSchedule::linear:
      if (static_cast<double>(iter) < m / k + 1.0) return m - (iter - 1) * k;
      return 0.0;
    case LambdaSchedule::nonlinear:
      return m / iter;
    case LambdaSchedule::mutation:
      return first_convergence_seen ? 0.0 : m;
  }
  return 0.0;
}

Factors init_factors(std::span<const Entry> observed, std::size_t n_users, std::size_t n_items, int d,
                     std::uint64_t seed) {
  if (d < 1 || static_cast<std::size_t>(d) > std::min(n_users, n_items)) {
    throw DimensionError("latent dimension " + std::to_string(d) + " exceeds min(N, M)");
  }
  const auto n = static_cast<Eigen::Index>(n_users);
  const auto m = static_cast<Eigen::Index>(n_items);
  Matrix dense = Matrix::Zero(n, m);
  bool any_nonzero = false;
  for (const auto& e : observed) {
    if (e.user >= n_users || e.item >= n_items) throw DataError("observed cell outside the grid");
    dense(e.user, e.item) = e.value;
    any_nonzero = any_nonzero || e.value != 0.0;
  }

  Factors out;
  if (any_nonzero) {
    Eigen::BDCSVD<Matrix> svd(dense, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.U = svd.matrixU().leftCols(d);
    out.V = svd.matrixV().leftCols(d);
    out.from_svd = true;
    const auto I = Matrix::Identity(d, d);
    if (!(out.U.transpose() * out.U).isApprox(I, 1e-10)) out.U = orthonormal_columns(out.U);
    if (!(out.V.transpose() * out.V).isApprox(I, 1e-10)) out.V = orthonormal_columns(out.V);
    return out;
  }

  Rng rng(seed);
  Matrix U(n, d), V(m, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) U(i, j) = uniform(rng, -1.0, 1.0);
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) V(i, j) = uniform(rng, -1.0, 1.0);
  }
  out.U = orthonormal_columns(U);
  out.V = orthonormal_columns(V);
  return out;
}

Matrix predict(const HybridModel& model) {
  Matrix out(model.n_users(), model.n_items());
  for (Eigen::Index u = 0; u < model.n_users(); ++u) {
    const auto ub = left_product(model.U, model.B_R, u);
    for (Eigen::Index v = 0; v < model.n_items(); ++v) out(u, v) = fixed_dot(ub, model.V, v);
  }
  return out;
}

double predict_one(const HybridModel& model, std::size_t user, std::size_t item) {
  if (user >= static_cast<std::size_t>(model.n_users()) || item >= static_cast<std::size_t>(model.n_items())) {
    throw DataError("prediction index (" + std::to_string(user) + ", " + std::to_string(item) + ") out of range");
  }
  const auto ub = left_product(model.U, model.B_R, static_cast<Eigen::Index>(user));
  return fixed_dot(ub, model.V, static_cast<Eigen::Index>(item));
}

}  // namespace recf::model
