#include "dpam/prox.hpp"

#include <cmath>

namespace dpam {

void ThresholdSpec::validate() const {
  if ((gamma_vec.array() < 0.0).any() || !(gamma_joint >= 0.0))
    throw ContractViolation("ThresholdSpec: thresholds must be >= 0");
}

EmpiricalNormTerm::EmpiricalNormTerm(Eigen::VectorXd residual, double lambda)
    : r(std::move(residual)), lam(lambda) {
  if (r.size() == 0) throw ContractViolation("EmpiricalNormTerm: empty residual");
  if (!(lam >= 0.0)) throw ContractViolation("EmpiricalNormTerm: lambda must be >= 0");
  sqrt_n = std::sqrt(static_cast<double>(r.size()));
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& x, const Eigen::VectorXd& gamma) {
  if (x.size() != gamma.size())
    throw ContractViolation("soft_threshold: length mismatch");
  Eigen::VectorXd out = x;
  soft_threshold_inplace(out, gamma, 1.0);
  return out;
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& x, const ThresholdSpec& spec) {
  spec.validate();
  return soft_threshold(x, spec.gamma_vec);
}

void soft_threshold_inplace(Eigen::VectorXd& x, const Eigen::VectorXd& gamma,
                            double scale) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double t = scale * gamma[i];
    const double a = x[i];
    if (a > t)
      x[i] = a - t;
    else if (a < -t)
      x[i] = a + t;
    else
      x[i] = 0.0;
  }
}

Eigen::VectorXd joint_soft_threshold(const Eigen::VectorXd& x, double gamma) {
  if (!(gamma >= 0.0)) throw ContractViolation("joint_soft_threshold: gamma must be >= 0");
  if (x.hasNaN()) throw ContractViolation("joint_soft_threshold: NaN input");
  const double nrm = x.norm();
  if (nrm <= gamma) return Eigen::VectorXd::Zero(x.size());
  return (1.0 - gamma / nrm) * x;
}

Eigen::VectorXd joint_soft_threshold(const Eigen::VectorXd& x, const ThresholdSpec& spec) {
  spec.validate();
  return joint_soft_threshold(x, spec.gamma_joint);
}

Eigen::VectorXd prox_f(const Eigen::VectorXd& z, double alpha,
                       const EmpiricalNormTerm& term) {
  if (z.size() != term.n()) throw ContractViolation("prox_f: length mismatch");
  if (!(alpha > 0.0)) throw ContractViolation("prox_f: alpha must be > 0");
  Eigen::VectorXd a = z + alpha * term.r;
  const double s = joint_shrink_factor(a.norm(), alpha * term.lam * term.sqrt_n);
  return (s / (1.0 + alpha)) * a;
}

Eigen::VectorXd prox_f_star(const Eigen::VectorXd& x, double alpha,
                            const EmpiricalNormTerm& term) {
  if (x.size() != term.n()) throw ContractViolation("prox_f_star: length mismatch");
  if (!(alpha > 0.0)) throw ContractViolation("prox_f_star: alpha must be > 0");
  // alpha prox_{f/alpha}(x/alpha) = alpha/(1+alpha) T(x + r, lam sqrt(n))
  Eigen::VectorXd a = x + term.r;
  const double s = joint_shrink_factor(a.norm(), term.lam * term.sqrt_n);
  return x - (alpha / (1.0 + alpha) * s) * a;
}

double f_star_value(const Eigen::VectorXd& u, const EmpiricalNormTerm& term) {
  if (u.size() != term.n()) throw ContractViolation("f_star_value: length mismatch");
  const double h = std::max((u + term.r).norm() - term.lam * term.sqrt_n, 0.0);
  return 0.5 * h * h - 0.5 * term.r.squaredNorm();
}

Eigen::VectorXd grad_f_star(const Eigen::VectorXd& u, const EmpiricalNormTerm& term) {
  if (u.size() != term.n()) throw ContractViolation("grad_f_star: length mismatch");
  Eigen::VectorXd a = u + term.r;
  return joint_shrink_factor(a.norm(), term.lam * term.sqrt_n) * a;
}

CoordProxResult coord_prox_f_star_detail(double b_i, const CoordinateState& state,
                                         double alpha, double lam, double sqrt_n) {
  const double a = b_i + state.r_i;
  if (a == 0.0) return {-state.r_i, 0.0, 0};
  const double S = std::max(state.sq_norm_minus_i, 0.0);
  const double rad = lam * sqrt_n;
  if (a * a + S <= rad * rad) return {b_i, 1.0, 0};
  const double abs_a = std::abs(a);
  if (S == 0.0 || rad == 0.0) {
    const double c = (1.0 + alpha * rad / abs_a) / (1.0 + alpha);
    return {c * a - state.r_i, c, 0};
  }

  // phi(c) = (1 + alpha - alpha rad / sqrt(c^2 a^2 + S)) c - 1 is increasing
  // on [1/(1+alpha), 1], negative at the left end and positive at the right.
  auto phi = [&](double c) {
    return (1.0 + alpha - alpha * rad / std::sqrt(c * c * a * a + S)) * c - 1.0;
  };
  double lo = 1.0 / (1.0 + alpha);
  double hi = 1.0;
  double c = 0.5 * (lo + hi);
  for (int it = 1; it <= 200; ++it) {
    c = 0.5 * (lo + hi);
    const double f = phi(c);
    if (std::abs(f) <= 1e-12 || !(c > lo && c < hi)) return {c * a - state.r_i, c, it};
    if (f > 0.0)
      hi = c;
    else
      lo = c;
  }
  throw SolverFailure("coord_prox_f_star: bisection did not converge in 200 steps");
}

double coord_prox_f_star(double b_i, const CoordinateState& state, double alpha,
                         const EmpiricalNormTerm& term) {
  if (!(alpha > 0.0)) throw ContractViolation("coord_prox_f_star: alpha must be > 0");
  if (!(state.sq_norm_minus_i >= -1e-8 * (1.0 + state.r_i * state.r_i)))
    throw ContractViolation("coord_prox_f_star: negative running norm");
  return coord_prox_f_star_detail(b_i, state, alpha, term.lam, term.sqrt_n).value;
}

double single_block_objective(const Eigen::VectorXd& beta, const Eigen::VectorXd& xb,
                              const SingleBlockProblem& prob) {
  const double n = static_cast<double>(prob.n());
  return 0.5 / n * (prob.r - xb).squaredNorm() +
         prob.gamma_diag.cwiseProduct(beta).lpNorm<1>() +
         prob.lam * xb.norm() / std::sqrt(n);
}

double single_block_objective(const Eigen::VectorXd& beta, const SingleBlockProblem& prob) {
  if (beta.size() != prob.d())
    throw ContractViolation("single_block_objective: beta length != cols of X");
  const Eigen::VectorXd xb = prob.X * beta;
  return single_block_objective(beta, xb, prob);
}

}  // namespace dpam
