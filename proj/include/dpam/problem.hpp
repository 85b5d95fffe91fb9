#ifndef DPAM_PROBLEM_HPP
#define DPAM_PROBLEM_HPP

#include <Eigen/Dense>

#include "dpam/errors.hpp"

namespace dpam {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One instance of the single-block problem
///
///   min_beta (1/2n)||r - X beta||^2 + ||Gamma beta||_1 + lam ||X beta||_n
///
/// X is borrowed; the caller keeps it (and the optional caches) alive for the lifetime of the problem.
struct SingleBlockProblem {
  SingleBlockProblem(const Eigen::MatrixXd& x, Eigen::VectorXd residual,
                     Eigen::VectorXd gamma, double lambda,
                     double spectral_norm_sq,
                     const Eigen::MatrixXd* gram_over_n = nullptr,
                     const RowMatrix* row_major = nullptr)
      : X(x),
        r(std::move(residual)),
        gamma_diag(std::move(gamma)),
        lam(lambda),
        spectral_norm_sq(spectral_norm_sq),
        gram(gram_over_n),
        rows(row_major) {
    if (r.size() != X.rows())
      throw ContractViolation("SingleBlockProblem: residual length != rows of X");
    if (gamma_diag.size() != X.cols())
      throw ContractViolation("SingleBlockProblem: gamma length != cols of X");
    if (!(lam >= 0.0))
      throw ContractViolation("SingleBlockProblem: lambda must be >= 0");
    if ((gamma_diag.array() < 0.0).any())
      throw ContractViolation("SingleBlockProblem: gamma entries must be >= 0");
    if (gram && (gram->rows() != X.cols() || gram->cols() != X.cols()))
      throw ContractViolation("SingleBlockProblem: gram has wrong shape");
    if (rows && (rows->rows() != X.rows() || rows->cols() != X.cols()))
      throw ContractViolation("SingleBlockProblem: row-major copy has wrong shape");
  }

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index d() const { return X.cols(); }

  const Eigen::MatrixXd& X;
  Eigen::VectorXd r;
  Eigen::VectorXd gamma_diag;
  double lam;
  double spectral_norm_sq;
  const Eigen::MatrixXd* gram;  // optional X^T X / n
  const RowMatrix* rows;        // optional row-major copy of X for row sampling
};

}  // namespace dpam

#endif  // DPAM_PROBLEM_HPP
