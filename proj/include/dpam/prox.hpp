#ifndef DPAM_PROX_HPP
#define DPAM_PROX_HPP

#include <Eigen/Dense>

#include "dpam/problem.hpp"

namespace dpam {

/// Thresholds for the element-wise and joint soft-threshold operators.
struct ThresholdSpec {
  Eigen::VectorXd gamma_vec;
  double gamma_joint = 0.0;

  void validate() const;
};

/// The loss part  f(z) = 1/2 ||r - z||^2 + lam sqrt(n) ||z||  of the
/// rescaled single-block problem.
struct EmpiricalNormTerm {
  EmpiricalNormTerm(Eigen::VectorXd residual, double lambda);

  Eigen::Index n() const { return r.size(); }

  Eigen::VectorXd r;
  double lam;
  double sqrt_n;
};

/// sign(x_i) max(|x_i| - gamma_i, 0), with exact zeros below threshold.
Eigen::VectorXd soft_threshold(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& gamma);
Eigen::VectorXd soft_threshold(const Eigen::VectorXd& x, const ThresholdSpec& spec);

/// In-place variant: x <- S(x, scale * gamma).
void soft_threshold_inplace(Eigen::VectorXd& x, const Eigen::VectorXd& gamma,
                            double scale);

/// (1 - gamma/||x||)_+ x, zero vector when ||x|| <= gamma.
Eigen::VectorXd joint_soft_threshold(const Eigen::VectorXd& x, double gamma);
Eigen::VectorXd joint_soft_threshold(const Eigen::VectorXd& x, const ThresholdSpec& spec);

/// Scale factor (1 - gamma/norm)_+ used by joint_soft_threshold.
inline double joint_shrink_factor(double norm, double gamma) {
  return norm > gamma ? 1.0 - gamma / norm : 0.0;
}

Eigen::VectorXd prox_f(const Eigen::VectorXd& z, double alpha,
                       const EmpiricalNormTerm& term);

/// prox of alpha f*, via Moreau: x - alpha prox_{f/alpha}(x/alpha).
Eigen::VectorXd prox_f_star(const Eigen::VectorXd& x, double alpha,
                            const EmpiricalNormTerm& term);

/// f*(u) = 1/2 (||u + r|| - lam sqrt(n))_+^2 - 1/2 ||r||^2
double f_star_value(const Eigen::VectorXd& u, const EmpiricalNormTerm& term);

/// T(u + r, lam sqrt(n)); inside the ball the zero subgradient is returned.
Eigen::VectorXd grad_f_star(const Eigen::VectorXd& u, const EmpiricalNormTerm& term);

struct CoordinateState {
  double r_i;
  double sq_norm_minus_i;  // ||v + r||^2 - (v_i + r_i)^2
};

struct CoordProxResult {
  double value;
  double c;
  int iterations;
};

/// Minimizer over v_i of 1/2 (v_i - b_i)^2 + alpha f*(v) with the other
/// coordinates of v held fixed.
CoordProxResult coord_prox_f_star_detail(double b_i, const CoordinateState& state,
                                         double alpha, double lam, double sqrt_n);

double coord_prox_f_star(double b_i, const CoordinateState& state, double alpha,
                         const EmpiricalNormTerm& term);

/// (1/2n)||r - X beta||^2 + ||Gamma beta||_1 + lam ||X beta||_n
double single_block_objective(const Eigen::VectorXd& beta,
                              const SingleBlockProblem& prob);

/// Same objective from a precomputed fit X beta.
double single_block_objective(const Eigen::VectorXd& beta, const Eigen::VectorXd& xb,
                              const SingleBlockProblem& prob);

}  // namespace dpam

#endif  // DPAM_PROX_HPP
