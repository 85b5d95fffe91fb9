#ifndef DPAM_SINGLE_BLOCK_HPP
#define DPAM_SINGLE_BLOCK_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dpam/problem.hpp"

namespace dpam {

enum class SagVariant { SAG, SAGA };

struct StepSizes {
  double tau = 0.0;
  double alpha = 1.0;

  void validate() const;
  bool cp_feasible(double norm_sq, Eigen::Index n) const;
  bool ama_feasible(double norm_sq, Eigen::Index n) const;
  bool condat_vu_feasible(double norm_sq, Eigen::Index n) const;
};

/// alpha = 1, tau = n / (alpha ||X||^2).
StepSizes default_cp_sizes(const SingleBlockProblem& prob, double alpha = 1.0);
/// alpha = 1, tau = (4n/3) / (alpha ||X||^2).
StepSizes default_ama_sizes(const SingleBlockProblem& prob, double alpha = 1.0);
/// tau = 0.99 n / ((alpha + 1/2) ||X||^2).
StepSizes default_condat_vu_sizes(const SingleBlockProblem& prob, double alpha = 1.0);
/// max_i ||X_i||^2, or 1 for an all-zero design.
double max_row_norm_sq(const SingleBlockProblem& prob);
/// Row-sampling solvers: alpha = 1/4, tau = c / (alpha max_i ||X_i||^2) with
/// c = 2, or c = 1 for the SAGA gradient, whose own-row term is not damped by 1/n.
StepSizes default_stochastic_cp_sizes(const SingleBlockProblem& prob);
StepSizes default_stochastic_ama_sizes(const SingleBlockProblem& prob,
                                       SagVariant variant = SagVariant::SAG);
/// Inner SAGA step for stochastic CC: 1 / (3 max_i ||X_i||^2).
double default_stochastic_cc_tau(const SingleBlockProblem& prob);

struct SolverState {
  Eigen::VectorXd beta;
  Eigen::VectorXd beta_prev;
  Eigen::VectorXd dual;  // u or v, length n
  Eigen::VectorXd w;     // X^T dual / n
  double L2 = 0.0;       // ||dual + r||^2
  std::uint64_t rng_seed = 0;
};

/// beta = beta_prev = beta0, dual = X beta0 - r.
SolverState initial_state(const SingleBlockProblem& prob, const Eigen::VectorXd& beta0);
SolverState initial_state(const SingleBlockProblem& prob);

struct SolveReport {
  Eigen::VectorXd beta_hat;
  std::vector<double> objective_trace;  // one exact objective per batch step
  std::vector<double> perturbed_trace;  // CC batch only: delta-perturbed objective
  bool was_reset_to_zero = false;
  double scans_used = 0.0;
  bool step_feasible = true;
  SolverState final_state;
};


SolveReport solve_cp_batch(const SingleBlockProblem& prob, int steps, const StepSizes& sizes,
                           const SolverState& init, bool record_trace = true);

SolveReport solve_ama_batch(const SingleBlockProblem& prob, int steps, const StepSizes& sizes,
                            const SolverState& init, bool record_trace = true);

SolveReport solve_cp_stochastic(const SingleBlockProblem& prob, int batch_steps,
                                const StepSizes& sizes, const SolverState& init,
                                std::uint64_t seed, bool record_trace = true);

SolveReport solve_ama_stochastic(const SingleBlockProblem& prob, int batch_steps,
                                 const StepSizes& sizes, const SolverState& init,
                                 std::uint64_t seed, SagVariant variant,
                                 bool record_trace = true);

/// Majorize-minimize on the delta-perturbed objective. Throws InternalError
/// if the perturbed objective ever increases.
SolveReport solve_cc_batch(const SingleBlockProblem& prob, int steps, double delta,
                           const Eigen::VectorXd& beta0, bool record_trace = true);

SolveReport solve_cc_stochastic(const SingleBlockProblem& prob, int batch_steps, double tau,
                                double delta, const Eigen::VectorXd& beta0,
                                std::uint64_t seed, bool record_trace = true);

SolveReport solve_condat_vu(const SingleBlockProblem& prob, int steps, const StepSizes& sizes,
                            const SolverState& init, bool record_trace = true);

/// (1/2n)||r - X beta||^2 + ||Gamma beta||_1 + lam sqrt(||X beta||_n^2 + delta)
double perturbed_objective(const Eigen::VectorXd& beta, const SingleBlockProblem& prob,
                           double delta);

/// Gradient of the smooth part of the perturbed objective.
Eigen::VectorXd perturbed_smooth_gradient(const Eigen::VectorXd& beta,
                                          const SingleBlockProblem& prob, double delta);

/// Lasso part of the problem (lam ignored), solved to KKT tolerance `tol`.
Eigen::VectorXd lasso_exact(const SingleBlockProblem& prob, double tol = 1e-10,
                            const Eigen::VectorXd* beta0 = nullptr, int max_iter = 100000);

/// Largest KKT violation of beta for the Lasso part.
double lasso_kkt_residual(const SingleBlockProblem& prob, const Eigen::VectorXd& beta);

/// (1 - lam / ||X beta_tilde||_n)_+ beta_tilde; zero when the norm is zero.
Eigen::VectorXd threshold_lasso_solution(const Eigen::VectorXd& beta_tilde,
                                         const SingleBlockProblem& prob);

/// threshold_lasso_solution(lasso_exact(prob)).
SolveReport solve_oracle(const SingleBlockProblem& prob, double tol = 1e-10,
                         const Eigen::VectorXd* beta0 = nullptr);

}  // namespace dpam

#endif  // DPAM_SINGLE_BLOCK_HPP
