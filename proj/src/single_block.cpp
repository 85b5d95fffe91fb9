#include "dpam/single_block.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dpam/prox.hpp"
#include "dpam/rng.hpp"

namespace dpam {

namespace {

constexpr std::uint64_t kStochasticCpStream = 0x5043;
constexpr std::uint64_t kStochasticAmaStream = 0x414D41;
constexpr std::uint64_t kStochasticCcStream = 0x4343;

void check_steps(int steps, const char* who) {
  if (steps < 0) throw ContractViolation(std::string(who) + ": step count must be >= 0");
}

void check_state(const SingleBlockProblem& prob, const SolverState& s, const char* who) {
  if (s.beta.size() != prob.d() || s.beta_prev.size() != prob.d() ||
      s.dual.size() != prob.n())
    throw ContractViolation(std::string(who) + ": initial state has wrong dimensions");
}

void check_finite(const Eigen::VectorXd& v, long step, const char* who) {
  if (!v.allFinite()) throw DivergenceError(std::string(who) + ": non-finite iterate", step);
}

double norm_n(const Eigen::VectorXd& v) {
  return v.norm() / std::sqrt(static_cast<double>(v.size()));
}

// Row-major view of X for the row-sampling solvers; copies only when the
// caller did not supply one.
class RowAccess {
 public:
  explicit RowAccess(const SingleBlockProblem& prob) {
    if (prob.rows) {
      ptr_ = prob.rows;
    } else {
      own_.emplace(prob.X);
      ptr_ = &*own_;
    }
  }
  const RowMatrix& operator*() const { return *ptr_; }

 private:
  std::optional<RowMatrix> own_;
  const RowMatrix* ptr_;
};

}  // namespace

void StepSizes::validate() const {
  if (!(tau > 0.0) || !(alpha > 0.0))
    throw ContractViolation("StepSizes: tau and alpha must be > 0");
}

bool StepSizes::cp_feasible(double norm_sq, Eigen::Index n) const {
  return alpha * tau * norm_sq <= static_cast<double>(n) * (1.0 + 1e-12);
}

bool StepSizes::ama_feasible(double norm_sq, Eigen::Index n) const {
  return alpha < 2.0 && alpha * tau * norm_sq <= 4.0 * n / 3.0 * (1.0 + 1e-12);
}

bool StepSizes::condat_vu_feasible(double norm_sq, Eigen::Index n) const {
  return (alpha + 0.5) * tau * norm_sq < static_cast<double>(n);
}

static double safe_norm_sq(const SingleBlockProblem& prob) {
  return prob.spectral_norm_sq > 0.0 ? prob.spectral_norm_sq : 1.0;
}

StepSizes default_cp_sizes(const SingleBlockProblem& prob, double alpha) {
  return {static_cast<double>(prob.n()) / (alpha * safe_norm_sq(prob)), alpha};
}

StepSizes default_ama_sizes(const SingleBlockProblem& prob, double alpha) {
  return {4.0 * prob.n() / 3.0 / (alpha * safe_norm_sq(prob)), alpha};
}

StepSizes default_condat_vu_sizes(const SingleBlockProblem& prob, double alpha) {
  return {0.99 * prob.n() / ((alpha + 0.5) * safe_norm_sq(prob)), alpha};
}

double max_row_norm_sq(const SingleBlockProblem& prob) {
  const double r2 = prob.X.rowwise().squaredNorm().maxCoeff();
  return r2 > 0.0 ? r2 : 1.0;
}

StepSizes default_stochastic_cp_sizes(const SingleBlockProblem& prob) {
  constexpr double alpha = 0.25;
  return {2.0 / (alpha * max_row_norm_sq(prob)), alpha};
}

StepSizes default_stochastic_ama_sizes(const SingleBlockProblem& prob, SagVariant variant) {
  constexpr double alpha = 0.25;
  const double c = variant == SagVariant::SAG ? 2.0 : 1.0;
  return {c / (alpha * max_row_norm_sq(prob)), alpha};
}

double default_stochastic_cc_tau(const SingleBlockProblem& prob) {
  return 1.0 / (3.0 * max_row_norm_sq(prob));
}

SolverState initial_state(const SingleBlockProblem& prob, const Eigen::VectorXd& beta0) {
  if (beta0.size() != prob.d())
    throw ContractViolation("initial_state: beta0 length != cols of X");
  SolverState s;
  s.beta = beta0;
  s.beta_prev = beta0;
  s.dual = prob.X * beta0 - prob.r;
  s.w = prob.X.transpose() * s.dual / static_cast<double>(prob.n());
  s.L2 = (s.dual + prob.r).squaredNorm();
  return s;
}

SolverState initial_state(const SingleBlockProblem& prob) {
  return initial_state(prob, Eigen::VectorXd::Zero(prob.d()));
}

SolveReport solve_cp_batch(const SingleBlockProblem& prob, int steps, const StepSizes& sizes,
                           const SolverState& init, bool record_trace) {
  check_steps(steps, "solve_cp_batch");
  check_state(prob, init, "solve_cp_batch");
  sizes.validate();
  const double n = static_cast<double>(prob.n());
  const double rad = prob.lam * std::sqrt(n);
  const double alpha = sizes.alpha, tau = sizes.tau;

  SolveReport rep;
  rep.step_feasible = sizes.cp_feasible(prob.spectral_norm_sq, prob.n());
  Eigen::VectorXd beta = init.beta, beta_prev = init.beta_prev, v = init.dual;
  Eigen::VectorXd xb = prob.X * beta, xb_prev = prob.X * beta_prev;
  Eigen::VectorXd arg(prob.n());
  bool last_inside = false;

  for (int k = 0; k < steps; ++k) {
    arg = v + alpha * (2.0 * xb - xb_prev);
    const double nrm = (arg + prob.r).norm();
    last_inside = nrm <= rad;
    const double s = joint_shrink_factor(nrm, rad);
    v = arg - (alpha / (1.0 + alpha) * s) * (arg + prob.r);

    beta_prev = beta;
    xb_prev = xb;
    beta.noalias() -= (tau / n) * (prob.X.transpose() * v);
    soft_threshold_inplace(beta, prob.gamma_diag, tau);
    check_finite(beta, k + 1, "solve_cp_batch");
    xb.noalias() = prob.X * beta;
    if (record_trace) rep.objective_trace.push_back(single_block_objective(beta, xb, prob));
  }

  rep.final_state.beta = beta;
  rep.final_state.beta_prev = beta_prev;
  rep.final_state.dual = v;
  rep.scans_used = steps;
  if (steps > 0 && last_inside) {
    rep.was_reset_to_zero = true;
    rep.beta_hat = Eigen::VectorXd::Zero(prob.d());
  } else {
    rep.beta_hat = beta;
  }
  return rep;
}

SolveReport solve_ama_batch(const SingleBlockProblem& prob, int steps, const StepSizes& sizes,
                            const SolverState& init, bool record_trace) {
  check_steps(steps, "solve_ama_batch");
  check_state(prob, init, "solve_ama_batch");
  sizes.validate();
  const double n = static_cast<double>(prob.n());
  const double rad = prob.lam * std::sqrt(n);
  const double alpha = sizes.alpha, tau = sizes.tau;

  SolveReport rep;
  rep.step_feasible = sizes.ama_feasible(prob.spectral_norm_sq, prob.n());
  Eigen::VectorXd beta = init.beta, u = init.dual;
  Eigen::VectorXd xb = prob.X * beta;
  Eigen::VectorXd z(prob.n());
  bool last_inside = false;

  for (int k = 0; k < steps; ++k) {
    z = prob.r + u;
    const double nrm = z.norm();
    last_inside = nrm <= rad;
    z *= joint_shrink_factor(nrm, rad);

    beta.noalias() -= (tau / n) * (prob.X.transpose() * (u + alpha * (xb - z)));
    soft_threshold_inplace(beta, prob.gamma_diag, tau);
    check_finite(beta, k + 1, "solve_ama_batch");
    xb.noalias() = prob.X * beta;
    u += alpha * (xb - z);
    if (record_trace) rep.objective_trace.push_back(single_block_objective(beta, xb, prob));
  }

  rep.final_state.beta = beta;
  rep.final_state.beta_prev = beta;
  rep.final_state.dual = u;
  rep.scans_used = steps;
  if (steps > 0 && last_inside) {
    rep.was_reset_to_zero = true;
    rep.beta_hat = Eigen::VectorXd::Zero(prob.d());
  } else {
    rep.beta_hat = beta;
  }
  return rep;
}

SolveReport solve_cp_stochastic(const SingleBlockProblem& prob, int batch_steps,
                                const StepSizes& sizes, const SolverState& init,
                                std::uint64_t seed, bool record_trace) {
  check_steps(batch_steps, "solve_cp_stochastic");
  check_state(prob, init, "solve_cp_stochastic");
  sizes.validate();
  const Eigen::Index n = prob.n();
  const double nd = static_cast<double>(n);
  const double sqrt_n = std::sqrt(nd);
  const double alpha = sizes.alpha, tau = sizes.tau;
  const RowAccess rows(prob);
  const RowMatrix& Xr = *rows;

  SolveReport rep;
  Eigen::VectorXd beta = init.beta, beta_prev = init.beta_prev, v = init.dual;
  Eigen::VectorXd w = prob.X.transpose() * v / nd;
  double L2 = (v + prob.r).squaredNorm();
  Eigen::VectorXd G(prob.d());
  CounterRng rng(stream_key(seed, kStochasticCpStream));

  for (int b = 0; b < batch_steps; ++b) {
    for (Eigen::Index s = 0; s < n; ++s) {
      const auto i = static_cast<Eigen::Index>(rng.index(n));
      const auto xi = Xr.row(i);
      const double r_i = prob.r[i];
      const double old = v[i];
      const double b_i = old + alpha * xi.dot(2.0 * beta - beta_prev);
      const double old_sq = (old + r_i) * (old + r_i);
      const CoordinateState cs{r_i, std::max(L2 - old_sq, 0.0)};
      const double fresh = coord_prox_f_star_detail(b_i, cs, alpha, prob.lam, sqrt_n).value;
      const double dv = fresh - old;
      if (!std::isfinite(dv))
        throw DivergenceError("solve_cp_stochastic: non-finite dual update",
                              static_cast<long>(b) * n + s + 1);

      G = w + dv * xi.transpose();
      beta_prev = beta;
      beta.noalias() -= tau * G;
      soft_threshold_inplace(beta, prob.gamma_diag, tau);
      w += (dv / nd) * xi.transpose();
      L2 = std::max(L2 - old_sq + (fresh + r_i) * (fresh + r_i), 0.0);
      v[i] = fresh;
    }
    check_finite(beta, static_cast<long>(b + 1) * n, "solve_cp_stochastic");
    if (record_trace) rep.objective_trace.push_back(single_block_objective(beta, prob));
  }

  rep.final_state.beta = beta;
  rep.final_state.beta_prev = beta_prev;
  rep.final_state.dual = v;
  rep.final_state.w = w;
  rep.final_state.L2 = L2;
  rep.final_state.rng_seed = seed;
  rep.scans_used = batch_steps;
  rep.beta_hat = beta;
  if (batch_steps > 0) {
    const Eigen::VectorXd a = v + alpha * (prob.X * (2.0 * beta - beta_prev)) + prob.r;
    if (norm_n(a) <= prob.lam) {
      rep.was_reset_to_zero = true;
      rep.beta_hat.setZero();
    }
  }
  return rep;
}

SolveReport solve_ama_stochastic(const SingleBlockProblem& prob, int batch_steps,
                                 const StepSizes& sizes, const SolverState& init,
                                 std::uint64_t seed, SagVariant variant, bool record_trace) {
  check_steps(batch_steps, "solve_ama_stochastic");
  check_state(prob, init, "solve_ama_stochastic");
  sizes.validate();
  const Eigen::Index n = prob.n();
  const double nd = static_cast<double>(n);
  const double rad = prob.lam * std::sqrt(nd);
  const double alpha = sizes.alpha, tau = sizes.tau;
  const double own_weight = variant == SagVariant::SAG ? 1.0 / nd : 1.0;
  const RowAccess rows(prob);
  const RowMatrix& Xr = *rows;

  SolveReport rep;
  Eigen::VectorXd beta = init.beta, u = init.dual;
  Eigen::VectorXd w = prob.X.transpose() * u / nd;
  double L2 = (u + prob.r).squaredNorm();
  Eigen::VectorXd G(prob.d());
  CounterRng rng(stream_key(seed, kStochasticAmaStream + (variant == SagVariant::SAG ? 0 : 1)));

  for (int b = 0; b < batch_steps; ++b) {
    for (Eigen::Index s = 0; s < n; ++s) {
      const auto i = static_cast<Eigen::Index>(rng.index(n));
      const auto xi = Xr.row(i);
      const double r_i = prob.r[i];
      const double old = u[i];
      const double grad_old = joint_shrink_factor(std::sqrt(L2), rad) * (r_i + old);
      const double xb_i = xi.dot(beta);
      const double fresh = old + alpha * (xb_i - grad_old);
      L2 = std::max(L2 - (r_i + old) * (r_i + old) + (r_i + fresh) * (r_i + fresh), 0.0);
      const double grad_new = joint_shrink_factor(std::sqrt(L2), rad) * (r_i + fresh);
      const double du = fresh - old;
      if (!std::isfinite(du))
        throw DivergenceError("solve_ama_stochastic: non-finite dual update",
                              static_cast<long>(b) * n + s + 1);

      G = w + (own_weight * du + alpha * (xb_i - grad_new)) * xi.transpose();
      beta.noalias() -= tau * G;
      soft_threshold_inplace(beta, prob.gamma_diag, tau);
      w += (du / nd) * xi.transpose();
      u[i] = fresh;
    }
    check_finite(beta, static_cast<long>(b + 1) * n, "solve_ama_stochastic");
    if (record_trace) rep.objective_trace.push_back(single_block_objective(beta, prob));
  }

  rep.final_state.beta = beta;
  rep.final_state.beta_prev = beta;
  rep.final_state.dual = u;
  rep.final_state.w = w;
  rep.final_state.L2 = L2;
  rep.final_state.rng_seed = seed;
  rep.scans_used = batch_steps;
  rep.beta_hat = beta;
  if (batch_steps > 0 && norm_n(prob.r + u) <= prob.lam) {
    rep.was_reset_to_zero = true;
    rep.beta_hat.setZero();
  }
  return rep;
}

double perturbed_objective(const Eigen::VectorXd& beta, const SingleBlockProblem& prob,
                           double delta) {
  const double n = static_cast<double>(prob.n());
  const Eigen::VectorXd xb = prob.X * beta;
  return 0.5 / n * (prob.r - xb).squaredNorm() +
         prob.gamma_diag.cwiseProduct(beta).lpNorm<1>() +
         prob.lam * std::sqrt(xb.squaredNorm() / n + delta);
}

Eigen::VectorXd perturbed_smooth_gradient(const Eigen::VectorXd& beta,
                                          const SingleBlockProblem& prob, double delta) {
  const double n = static_cast<double>(prob.n());
  const Eigen::VectorXd xb = prob.X * beta;
  const double s = std::sqrt(xb.squaredNorm() / n + delta);
  return prob.X.transpose() * ((1.0 + prob.lam / s) * xb - prob.r) / n;
}

SolveReport solve_cc_batch(const SingleBlockProblem& prob, int steps, double delta,
                           const Eigen::VectorXd& beta0, bool record_trace) {
  check_steps(steps, "solve_cc_batch");
  if (!(delta > 0.0)) throw ContractViolation("solve_cc_batch: delta must be > 0");
  if (beta0.size() != prob.d()) throw ContractViolation("solve_cc_batch: beta0 length");
  const double n = static_cast<double>(prob.n());
  const double base = n / safe_norm_sq(prob);

  auto perturbed = [&](const Eigen::VectorXd& beta, const Eigen::VectorXd& xb) {
    return 0.5 / n * (prob.r - xb).squaredNorm() +
           prob.gamma_diag.cwiseProduct(beta).lpNorm<1>() +
           prob.lam * std::sqrt(xb.squaredNorm() / n + delta);
  };

  SolveReport rep;
  Eigen::VectorXd beta = beta0;
  Eigen::VectorXd xb = prob.X * beta;
  double prev = perturbed(beta, xb);
  for (int k = 0; k < steps; ++k) {
    const double s = std::sqrt(xb.squaredNorm() / n + delta);
    const double tau = base / (1.0 + prob.lam / s);
    beta.noalias() -=
        (tau / n) * (prob.X.transpose() * ((1.0 + prob.lam / s) * xb - prob.r));
    soft_threshold_inplace(beta, prob.gamma_diag, tau);
    check_finite(beta, k + 1, "solve_cc_batch");
    xb.noalias() = prob.X * beta;
    const double cur = perturbed(beta, xb);
    if (cur > prev + 1e-10 * std::max(1.0, std::abs(prev)))
      throw InternalError("solve_cc_batch: perturbed objective increased at step " +
                          std::to_string(k + 1));
    prev = cur;
    if (record_trace) {
      rep.objective_trace.push_back(single_block_objective(beta, xb, prob));
      rep.perturbed_trace.push_back(cur);
    }
  }
  rep.final_state.beta = beta;
  rep.final_state.beta_prev = beta;
  rep.scans_used = steps;
  rep.beta_hat = beta;
  return rep;
}

SolveReport solve_cc_stochastic(const SingleBlockProblem& prob, int batch_steps, double tau,
                                double delta, const Eigen::VectorXd& beta0,
                                std::uint64_t seed, bool record_trace) {
  check_steps(batch_steps, "solve_cc_stochastic");
  if (!(tau > 0.0)) throw ContractViolation("solve_cc_stochastic: tau must be > 0");
  if (!(delta > 0.0)) throw ContractViolation("solve_cc_stochastic: delta must be > 0");
  if (beta0.size() != prob.d()) throw ContractViolation("solve_cc_stochastic: beta0 length");
  const Eigen::Index n = prob.n();
  const double nd = static_cast<double>(n);
  const RowAccess rows(prob);
  const RowMatrix& Xr = *rows;

  SolveReport rep;
  Eigen::VectorXd beta = beta0;
  Eigen::VectorXd v(n), w(prob.d());
  CounterRng rng(stream_key(seed, kStochasticCcStream));

  for (int b = 0; b < batch_steps; ++b) {
    const Eigen::VectorXd xb = prob.X * beta;
    const double s = std::sqrt(xb.squaredNorm() / nd + delta);
    const double c = 1.0 / (1.0 + prob.lam / s);
    v = xb - c * prob.r;
    w = prob.X.transpose() * v / nd;
    for (Eigen::Index t = 0; t < n; ++t) {
      const auto i = static_cast<Eigen::Index>(rng.index(n));
      const auto xi = Xr.row(i);
      const double fresh = xi.dot(beta) - c * prob.r[i];
      const double dv = fresh - v[i];
      if (!std::isfinite(dv))
        throw DivergenceError("solve_cc_stochastic: non-finite update",
                              static_cast<long>(b) * n + t + 1);
      beta.noalias() -= tau * (w + dv * xi.transpose());
      soft_threshold_inplace(beta, prob.gamma_diag, tau * c);
      w += (dv / nd) * xi.transpose();
      v[i] = fresh;
    }
    check_finite(beta, static_cast<long>(b + 1) * n, "solve_cc_stochastic");
    if (record_trace) rep.objective_trace.push_back(single_block_objective(beta, prob));
  }
  rep.final_state.beta = beta;
  rep.final_state.beta_prev = beta;
  rep.final_state.dual = v;
  rep.final_state.w = w;
  rep.final_state.rng_seed = seed;
  rep.scans_used = batch_steps;
  rep.beta_hat = beta;
  return rep;
}

SolveReport solve_condat_vu(const SingleBlockProblem& prob, int steps, const StepSizes& sizes,
                            const SolverState& init, bool record_trace) {
  check_steps(steps, "solve_condat_vu");
  check_state(prob, init, "solve_condat_vu");
  sizes.validate();
  const double n = static_cast<double>(prob.n());
  const double rad = prob.lam * std::sqrt(n);
  const double alpha = sizes.alpha, tau = sizes.tau;

  auto project = [rad](Eigen::VectorXd& u) {
    const double nrm = u.norm();
    if (nrm > rad) u *= (rad > 0.0 ? rad / nrm : 0.0);
  };

  SolveReport rep;
  rep.step_feasible = sizes.condat_vu_feasible(prob.spectral_norm_sq, prob.n());
  Eigen::VectorXd beta = init.beta, u = init.dual;
  project(u);
  Eigen::VectorXd xb = prob.X * beta, xb_new(prob.n());

  for (int k = 0; k < steps; ++k) {
    beta.noalias() -= (tau / n) * (prob.X.transpose() * (u + xb - prob.r));
    soft_threshold_inplace(beta, prob.gamma_diag, tau);
    check_finite(beta, k + 1, "solve_condat_vu");
    xb_new.noalias() = prob.X * beta;
    u += alpha * (2.0 * xb_new - xb);
    project(u);
    xb.swap(xb_new);
    if (record_trace) rep.objective_trace.push_back(single_block_objective(beta, xb, prob));
  }
  rep.final_state.beta = beta;
  rep.final_state.beta_prev = beta;
  rep.final_state.dual = u;
  rep.scans_used = steps;
  rep.beta_hat = beta;
  return rep;
}

double lasso_kkt_residual(const SingleBlockProblem& prob, const Eigen::VectorXd& beta) {
  const double n = static_cast<double>(prob.n());
  const Eigen::VectorXd g = prob.X.transpose() * (prob.X * beta - prob.r) / n;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double gam = prob.gamma_diag[j];
    const double viol = beta[j] == 0.0 ? std::max(std::abs(g[j]) - gam, 0.0)
                                       : std::abs(g[j] + (beta[j] > 0 ? gam : -gam));
    worst = std::max(worst, viol);
  }
  return worst;
}

Eigen::VectorXd lasso_exact(const SingleBlockProblem& prob, double tol,
                            const Eigen::VectorXd* beta0, int max_iter) {
  if (!(tol > 0.0)) throw ContractViolation("lasso_exact: tol must be > 0");
  if (max_iter < 1) throw ContractViolation("lasso_exact: max_iter must be >= 1");
  const Eigen::Index d = prob.d();
  const double n = static_cast<double>(prob.n());

  Eigen::MatrixXd own_gram;
  if (!prob.gram) own_gram = prob.X.transpose() * prob.X / n;
  const Eigen::MatrixXd& G = prob.gram ? *prob.gram : own_gram;
  const Eigen::VectorXd c = prob.X.transpose() * prob.r / n;
  const Eigen::VectorXd& gam = prob.gamma_diag;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  if (beta0) {
    if (beta0->size() != d) throw ContractViolation("lasso_exact: beta0 length");
    beta = *beta0;
  }
  Eigen::VectorXd g = G * beta - c;

  auto kkt = [&](const Eigen::VectorXd& b, const Eigen::VectorXd& grad) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double viol = b[j] == 0.0 ? std::max(std::abs(grad[j]) - gam[j], 0.0)
                                      : std::abs(grad[j] + (b[j] > 0 ? gam[j] : -gam[j]));
      worst = std::max(worst, viol);
    }
    return worst;
  };

  // Cyclic coordinate descent settles the easy cases and gives a warm start.
  constexpr int kCdSweeps = 30;
  for (int sweep = 0; sweep < kCdSweeps; ++sweep) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double gjj = G(j, j);
      if (gjj <= 0.0) {
        if (beta[j] != 0.0) {
          g -= G.col(j) * beta[j];
          beta[j] = 0.0;
        }
        continue;
      }
      const double z = beta[j] - g[j] / gjj;
      const double t = gam[j] / gjj;
      const double nb = z > t ? z - t : (z < -t ? z + t : 0.0);
      const double delta = nb - beta[j];
      if (delta != 0.0) {
        g.noalias() += G.col(j) * delta;
        beta[j] = nb;
      }
    }
    g.noalias() = G * beta - c;
    if (kkt(beta, g) <= tol) return beta;
  }

  // Sign-constrained active set. Each iteration moves toward the minimizer of
  // the quadratic on the current support, dropping the first coordinate that
  // hits zero, or adds the worst KKT violator once the support is optimal.
  std::vector<Eigen::Index> active;
  std::vector<double> sign(static_cast<std::size_t>(d), 0.0);
  for (Eigen::Index j = 0; j < d; ++j)
    if (beta[j] != 0.0 || gam[j] == 0.0) {
      active.push_back(j);
      if (gam[j] != 0.0) sign[j] = beta[j] > 0 ? 1.0 : -1.0;
    }
  Eigen::Index just_added = -1;

  for (int it = 0; it < max_iter; ++it) {
    const auto m = static_cast<Eigen::Index>(active.size());
    bool at_minimizer = true;
    if (m > 0) {
      Eigen::MatrixXd GA(m, m);
      Eigen::VectorXd rhs(m), cur(m);
      for (Eigen::Index a = 0; a < m; ++a) {
        const Eigen::Index j = active[a];
        for (Eigen::Index b = 0; b < m; ++b) GA(a, b) = G(j, active[b]);
        cur[a] = beta[j];
        rhs[a] = c[j] - sign[j] * gam[j];
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(GA);
      Eigen::VectorXd sol;
      if (ldlt.info() == Eigen::Success) {
        sol = ldlt.solve(rhs);
        sol += ldlt.solve(rhs - GA * sol);
      }
      if (sol.size() != m || !sol.allFinite())
        throw NumericError("lasso_exact: singular Gram matrix on the active set");

      double step = 1.0;
      Eigen::Index blocking = -1;
      for (Eigen::Index a = 0; a < m; ++a) {
        const double s = sign[active[a]];
        if (s == 0.0 || sol[a] * s > 0.0) continue;
        const double t = cur[a] == 0.0 ? 0.0 : cur[a] / (cur[a] - sol[a]);
        if (t < step) step = t, blocking = a;
      }
      if (blocking >= 0 && step == 0.0 && active[blocking] == just_added)
        throw ConvergenceError("lasso_exact: degenerate active-set step");
      for (Eigen::Index a = 0; a < m; ++a) beta[active[a]] = cur[a] + step * (sol[a] - cur[a]);
      if (blocking >= 0) {
        const Eigen::Index j = active[blocking];
        beta[j] = 0.0;
        sign[j] = 0.0;
        active.erase(active.begin() + blocking);
        at_minimizer = false;
      }
    }
    just_added = -1;
    if (!at_minimizer) continue;

    g.noalias() = G * beta - c;
    if (kkt(beta, g) <= tol) return beta;
    Eigen::Index worst = -1;
    double worst_viol = tol;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (beta[j] != 0.0 || gam[j] == 0.0) continue;
      const double viol = std::abs(g[j]) - gam[j];
      if (viol > worst_viol) worst_viol = viol, worst = j;
    }
    if (worst < 0) {
      // Only round-off on the support is left; one more solve cannot help.
      throw ConvergenceError("lasso_exact: KKT residual " + std::to_string(kkt(beta, g)) +
                             " above tolerance on an optimal support");
    }
    sign[worst] = g[worst] > 0 ? -1.0 : 1.0;
    active.insert(std::upper_bound(active.begin(), active.end(), worst), worst);
    just_added = worst;
  }
  throw ConvergenceError("lasso_exact: KKT tolerance not reached within " +
                         std::to_string(max_iter) + " active-set iterations");
}

Eigen::VectorXd threshold_lasso_solution(const Eigen::VectorXd& beta_tilde,
                                         const SingleBlockProblem& prob) {
  if (beta_tilde.size() != prob.d())
    throw ContractViolation("threshold_lasso_solution: length mismatch");
  const double nrm = norm_n(prob.X * beta_tilde);
  if (nrm == 0.0) return Eigen::VectorXd::Zero(prob.d());
  return joint_shrink_factor(nrm, prob.lam) * beta_tilde;
}

SolveReport solve_oracle(const SingleBlockProblem& prob, double tol,
                         const Eigen::VectorXd* beta0) {
  SolveReport rep;
  const Eigen::VectorXd tilde = lasso_exact(prob, tol, beta0);
  rep.beta_hat = threshold_lasso_solution(tilde, prob);
  rep.was_reset_to_zero = rep.beta_hat.isZero(0.0);
  rep.objective_trace.push_back(single_block_objective(rep.beta_hat, prob));
  rep.scans_used = 1.0;
  rep.final_state.beta = tilde;
  rep.final_state.beta_prev = tilde;
  return rep;
}

}  // namespace dpam
