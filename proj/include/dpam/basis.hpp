#ifndef DPAM_BASIS_HPP
#define DPAM_BASIS_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dpam {

/// Sorted, deduplicated knots per covariate.
using KnotGrid = std::vector<std::vector<double>>;

/// Sorted 0-based covariate indices of one ANOVA component.
using BlockId = std::vector<int>;

/// "x1:x3" style label (1-based) for logs and files.
std::string block_label(const BlockId& id);

struct DesignBlock {
  BlockId id;
  Eigen::MatrixXd basis;      // centered, n x d
  Eigen::RowVectorXd col_means;
  Eigen::VectorXd gamma_diag;
  double spectral_norm_sq = 0.0;
  std::vector<Eigen::Index> factor_dims;  // univariate column count per covariate

  Eigen::Index dim() const { return basis.cols(); }
};

/// Knots at probability levels j/(M-1), j = 0..M-1, using linear
/// interpolation between order statistics; ties collapsed.
std::vector<double> compute_knots(const Eigen::VectorXd& x_col, int num_knots);

KnotGrid compute_knot_grid(const Eigen::MatrixXd& X, int num_knots);

/// m = 1: columns 1{x > t_j}, j = 1..M-1.
/// m = 2: column x - t_1, then hinges (x - t_j)_+, j = 2..M-1.
Eigen::MatrixXd univariate_basis(const Eigen::VectorXd& x, const std::vector<double>& knots,
                                 int m);

/// Row-wise products of one column per factor; the first factor varies slowest.
Eigen::MatrixXd tensor_product(const std::vector<const Eigen::MatrixXd*>& factors);

/// Training means of each covariate's univariate basis columns.
using FactorMeans = std::vector<Eigen::RowVectorXd>;

FactorMeans univariate_means(const Eigen::MatrixXd& X, const KnotGrid& knots, int m);

/// Tensor basis of `id` on the rows of X before the final column centering.
/// With factor means, each univariate factor is centered before the product.
Eigen::MatrixXd raw_block_basis(const BlockId& id, const Eigen::MatrixXd& X,
                                const KnotGrid& knots, int m,
                                const FactorMeans* factor_means = nullptr);

/// Centers a raw tensor basis with the given means (the prediction path).
Eigen::MatrixXd center_columns(const Eigen::MatrixXd& raw, const Eigen::RowVectorXd& means);

/// Centered tensor block from per-covariate univariate bases (indexed by
/// covariate). gamma_diag is left empty.
DesignBlock tensor_block_basis(const BlockId& id,
                               const std::vector<Eigen::MatrixXd>& univariate);

/// Diagonal of the penalty matrix: zero only for the all-linear column when m = 2.
Eigen::VectorXd gamma_matrix(const std::vector<Eigen::Index>& factor_dims, int m,
                             double rho);

/// All subsets of {0..p-1} of size 1..K, by size then lexicographically.
std::vector<BlockId> enumerate_blocks(int p, int K);

/// Largest eigenvalue of X^T X.
double spectral_norm_sq(const Eigen::MatrixXd& X);

struct BasisParams {
  int num_knots = 11;
  int m = 2;
  int K = 2;
};

/// Every block of enumerate_blocks(p, K) with penalties rho and spectral norms
/// filled in. Univariate factors are centered by `factor_means` (computed from
/// X when null) before the tensor product, so an interaction block carries no
/// main-effect part.
std::vector<DesignBlock> build_design(const Eigen::MatrixXd& X, const KnotGrid& knots,
                                      const BasisParams& params, double rho,
                                      const FactorMeans* factor_means = nullptr);

}  // namespace dpam

#endif  // DPAM_BASIS_HPP
