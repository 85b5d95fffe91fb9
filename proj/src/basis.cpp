#include "dpam/basis.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "dpam/errors.hpp"

namespace dpam {

std::string block_label(const BlockId& id) {
  std::string s;
  for (std::size_t i = 0; i < id.size(); ++i) {
    if (i) s += ':';
    s += 'x' + std::to_string(id[i] + 1);
  }
  return s;
}

std::vector<double> compute_knots(const Eigen::VectorXd& x_col, int num_knots) {
  if (x_col.size() == 0) throw ContractViolation("compute_knots: empty column");
  if (num_knots < 2) throw ContractViolation("compute_knots: need at least 2 knots");
  if (!x_col.allFinite()) throw ContractViolation("compute_knots: non-finite input");

  std::vector<double> xs(x_col.data(), x_col.data() + x_col.size());
  std::sort(xs.begin(), xs.end());
  const double last = static_cast<double>(xs.size() - 1);

  std::vector<double> knots;
  knots.reserve(num_knots);
  for (int j = 0; j < num_knots; ++j) {
    const double h = last * j / (num_knots - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, xs.size() - 1);
    const double t = xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
    if (knots.empty() || t > knots.back()) knots.push_back(t);
  }
  if (knots.size() < 2)
    throw DegenerateCovariate("compute_knots: fewer than 2 distinct knots (constant column)");
  return knots;
}

KnotGrid compute_knot_grid(const Eigen::MatrixXd& X, int num_knots) {
  KnotGrid grid;
  grid.reserve(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    try {
      grid.push_back(compute_knots(X.col(j), num_knots));
    } catch (const DegenerateCovariate& e) {
      throw DegenerateCovariate("covariate x" + std::to_string(j + 1) + ": " + e.what());
    }
  }
  return grid;
}

Eigen::MatrixXd univariate_basis(const Eigen::VectorXd& x, const std::vector<double>& knots,
                                 int m) {
  if (m != 1 && m != 2) throw ContractViolation("univariate_basis: order m must be 1 or 2");
  if (knots.size() < 2) throw ContractViolation("univariate_basis: need at least 2 knots");
  const Eigen::Index n = x.size();
  const auto d = static_cast<Eigen::Index>(knots.size() - 1);
  Eigen::MatrixXd B(n, d);
  if (m == 1) {
    for (Eigen::Index j = 0; j < d; ++j)
      B.col(j) = (x.array() > knots[j]).cast<double>();
  } else {
    B.col(0) = x.array() - knots[0];
    for (Eigen::Index j = 1; j < d; ++j)
      B.col(j) = (x.array() - knots[j]).max(0.0);
  }
  return B;
}

Eigen::MatrixXd tensor_product(const std::vector<const Eigen::MatrixXd*>& factors) {
  if (factors.empty()) throw ContractViolation("tensor_product: no factors");
  Eigen::MatrixXd out = *factors[0];
  for (std::size_t f = 1; f < factors.size(); ++f) {
    const Eigen::MatrixXd& B = *factors[f];
    if (B.rows() != out.rows()) throw ContractViolation("tensor_product: row count mismatch");
    Eigen::MatrixXd next(out.rows(), out.cols() * B.cols());
    for (Eigen::Index a = 0; a < out.cols(); ++a)
      for (Eigen::Index b = 0; b < B.cols(); ++b)
        next.col(a * B.cols() + b) = out.col(a).cwiseProduct(B.col(b));
    out.swap(next);
  }
  return out;
}

FactorMeans univariate_means(const Eigen::MatrixXd& X, const KnotGrid& knots, int m) {
  if (static_cast<Eigen::Index>(knots.size()) != X.cols())
    throw ContractViolation("univariate_means: knot grid does not match covariate count");
  FactorMeans means;
  means.reserve(knots.size());
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    means.push_back(univariate_basis(X.col(j), knots[j], m).colwise().mean());
  return means;
}

Eigen::MatrixXd raw_block_basis(const BlockId& id, const Eigen::MatrixXd& X,
                                const KnotGrid& knots, int m, const FactorMeans* factor_means) {
  std::vector<Eigen::MatrixXd> uni;
  uni.reserve(id.size());
  for (int j : id) {
    if (j < 0 || j >= X.cols() || j >= static_cast<int>(knots.size()))
      throw ContractViolation("raw_block_basis: covariate index out of range");
    uni.push_back(univariate_basis(X.col(j), knots[j], m));
    if (factor_means) {
      if (j >= static_cast<int>(factor_means->size()) ||
          (*factor_means)[j].size() != uni.back().cols())
        throw ContractViolation("raw_block_basis: factor means do not match the basis");
      uni.back() = center_columns(uni.back(), (*factor_means)[j]);
    }
  }
  std::vector<const Eigen::MatrixXd*> ptrs;
  for (const auto& u : uni) ptrs.push_back(&u);
  return tensor_product(ptrs);
}

Eigen::MatrixXd center_columns(const Eigen::MatrixXd& raw, const Eigen::RowVectorXd& means) {
  if (raw.cols() != means.size()) throw ContractViolation("center_columns: width mismatch");
  return raw.rowwise() - means;
}

DesignBlock tensor_block_basis(const BlockId& id,
                               const std::vector<Eigen::MatrixXd>& univariate) {
  if (id.empty()) throw ContractViolation("tensor_block_basis: empty block");
  std::vector<const Eigen::MatrixXd*> ptrs;
  DesignBlock blk;
  blk.id = id;
  for (int j : id) {
    if (j < 0 || j >= static_cast<int>(univariate.size()))
      throw ContractViolation("tensor_block_basis: covariate index out of range");
    if (univariate[j].rows() != univariate[id[0]].rows())
      throw ContractViolation("tensor_block_basis: univariate bases differ in n");
    ptrs.push_back(&univariate[j]);
    blk.factor_dims.push_back(univariate[j].cols());
  }
  Eigen::MatrixXd raw = tensor_product(ptrs);
  blk.col_means = raw.colwise().mean();
  blk.basis = center_columns(raw, blk.col_means);
  return blk;
}

Eigen::VectorXd gamma_matrix(const std::vector<Eigen::Index>& factor_dims, int m,
                             double rho) {
  if (!(rho >= 0.0)) throw ContractViolation("gamma_matrix: rho must be >= 0");
  if (m != 1 && m != 2) throw ContractViolation("gamma_matrix: order m must be 1 or 2");
  Eigen::Index d = 1;
  for (auto k : factor_dims) d *= k;
  Eigen::VectorXd g = Eigen::VectorXd::Constant(d, rho);
  // Column 0 is the product of the global-linear columns.
  if (m == 2 && d > 0) g[0] = 0.0;
  return g;
}

std::vector<BlockId> enumerate_blocks(int p, int K) {
  if (p < 1 || K < 1 || K > p)
    throw ContractViolation("enumerate_blocks: need 1 <= K <= p");
  std::vector<BlockId> out;
  for (int k = 1; k <= K; ++k) {
    BlockId idx(k);
    for (int i = 0; i < k; ++i) idx[i] = i;
    while (true) {
      out.push_back(idx);
      int i = k - 1;
      while (i >= 0 && idx[i] == p - k + i) --i;
      if (i < 0) break;
      ++idx[i];
      for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  return out;
}

double spectral_norm_sq(const Eigen::MatrixXd& X) {
  if (!X.allFinite()) throw ContractViolation("spectral_norm_sq: non-finite entries");
  if (X.size() == 0) return 0.0;
  const Eigen::MatrixXd G = X.cols() <= X.rows()
                                ? Eigen::MatrixXd(X.transpose() * X)
                                : Eigen::MatrixXd(X * X.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw NumericError("spectral_norm_sq: eigenvalue iteration did not converge");
  return std::max(es.eigenvalues().maxCoeff(), 0.0);
}

std::vector<DesignBlock> build_design(const Eigen::MatrixXd& X, const KnotGrid& knots,
                                      const BasisParams& params, double rho,
                                      const FactorMeans* factor_means) {
  const int p = static_cast<int>(X.cols());
  if (static_cast<int>(knots.size()) != p)
    throw ContractViolation("build_design: knot grid does not match covariate count");
  const FactorMeans own = factor_means ? FactorMeans{} : univariate_means(X, knots, params.m);
  const FactorMeans& means = factor_means ? *factor_means : own;
  if (static_cast<int>(means.size()) != p)
    throw ContractViolation("build_design: factor means do not match covariate count");
  std::vector<Eigen::MatrixXd> uni;
  uni.reserve(p);
  for (int j = 0; j < p; ++j)
    uni.push_back(center_columns(univariate_basis(X.col(j), knots[j], params.m), means[j]));

  std::vector<DesignBlock> blocks;
  for (const auto& id : enumerate_blocks(p, params.K)) {
    DesignBlock blk = tensor_block_basis(id, uni);
    blk.gamma_diag = gamma_matrix(blk.factor_dims, params.m, rho);
    blk.spectral_norm_sq = spectral_norm_sq(blk.basis);
    blocks.push_back(std::move(blk));
  }
  return blocks;
}

}  // namespace dpam
