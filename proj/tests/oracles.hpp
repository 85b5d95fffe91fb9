// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the library's math kernels.
#ifndef DPAM_TEST_ORACLES_HPP
#define DPAM_TEST_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Fun = std::function<double(const Eigen::VectorXd&)>;

/// Minimizes a 1-D convex function on [lo, hi]: grid bracket then golden section.
inline double golden_min(const std::function<double(double)>& f, double lo, double hi,
                         int grid = 200, double tol = 1e-13) {
  double best = lo, fbest = f(lo);
  const double h = (hi - lo) / grid;
  for (int k = 1; k <= grid; ++k) {
    const double t = lo + k * h;
    const double ft = f(t);
    if (ft < fbest) fbest = ft, best = t;
  }
  double a = std::max(lo, best - h), b = std::min(hi, best + h);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (fc < fd) {
      b = d, d = c, fd = fc;
      c = b - g * (b - a), fc = f(c);
    } else {
      a = c, c = d, fc = fd;
      d = a + g * (b - a), fd = f(d);
    }
  }
  const double m = 0.5 * (a + b);
  return f(m) <= fbest ? m : best;
}

/// Direct-search minimizer for small convex problems: repeated exact line
/// searches along coordinate axes and random directions.
inline Eigen::VectorXd line_search_min(const Fun& f, Eigen::VectorXd x, double radius,
                                       int rounds = 400, unsigned seed = 7) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  const Eigen::Index n = x.size();
  double fx = f(x);
  for (int it = 0; it < rounds; ++it) {
    for (Eigen::Index k = 0; k <= n; ++k) {
      Eigen::VectorXd dir = Eigen::VectorXd::Zero(n);
      if (k < n)
        dir[k] = 1.0;
      else {
        for (Eigen::Index j = 0; j < n; ++j) dir[j] = nd(gen);
        dir.normalize();
      }
      const double span = std::max(radius * std::pow(0.7, it / 8), 1e-9);
      auto g = [&](double t) { return f(x + t * dir); };
      const double t = golden_min(g, -span, span, 40);
      const double ft = g(t);
      if (ft < fx) x += t * dir, fx = ft;
    }
  }
  return x;
}

/// line_search_min that also tries the origin, where the norm term has its kink.
inline Eigen::VectorXd minimize_with_zero_candidate(const Fun& f, const Eigen::VectorXd& x0,
                                                    double radius) {
  Eigen::VectorXd x = line_search_min(f, x0, radius);
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(x0.size());
  return f(z) <= f(x) ? z : x;
}

/// Largest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
inline double jacobi_max_eigenvalue(Eigen::MatrixXd A) {
  const Eigen::Index n = A.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
    if (off < 1e-30 * (1.0 + A.squaredNorm())) break;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (A(p, q) == 0.0) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
      }
  }
  return A.diagonal().maxCoeff();
}

/// Composite Simpson rule on [a, b] with `panels` (even) subintervals.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      long panels) {
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (long k = 1; k < panels; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  return s * h / 3.0;
}

/// Reference Lasso solver: accelerated proximal gradient with step 1/L.
inline Eigen::VectorXd lasso_ista(const Eigen::MatrixXd& X, const Eigen::VectorXd& r,
                                  const Eigen::VectorXd& gamma, int iters) {
  const double n = static_cast<double>(X.rows());
  const Eigen::MatrixXd G = X.transpose() * X / n;
  const Eigen::VectorXd c = X.transpose() * r / n;
  const double L = jacobi_max_eigenvalue(G);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(X.cols()), y = b;
  double t = 1.0;
  for (int k = 0; k < iters; ++k) {
    Eigen::VectorXd z = y - (G * y - c) / L;
    Eigen::VectorXd nb(z.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      const double th = gamma[j] / L;
      nb[j] = z[j] > th ? z[j] - th : (z[j] < -th ? z[j] + th : 0.0);
    }
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = nb + ((t - 1.0) / tn) * (nb - b);
    b = nb;
    t = tn;
  }
  return b;
}

/// Direct evaluation of the single-block objective, written independently.
inline double block_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& r,
                              const Eigen::VectorXd& gamma, double lam,
                              const Eigen::VectorXd& beta) {
  const double n = static_cast<double>(X.rows());
  double loss = 0.0, fit_sq = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double fi = 0.0;
    for (Eigen::Index j = 0; j < X.cols(); ++j) fi += X(i, j) * beta[j];
    loss += (r[i] - fi) * (r[i] - fi);
    fit_sq += fi * fi;
  }
  double l1 = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) l1 += gamma[j] * std::abs(beta[j]);
  return loss / (2.0 * n) + l1 + lam * std::sqrt(fit_sq / n);
}

inline Eigen::VectorXd randn(std::mt19937_64& gen, Eigen::Index n, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(gen);
  return v;
}

inline Eigen::MatrixXd randn_matrix(std::mt19937_64& gen, Eigen::Index n, Eigen::Index d) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd M(n, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < n; ++i) M(i, j) = nd(gen);
  return M;
}

inline double uniform(std::mt19937_64& gen, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(gen);
}

}  // namespace oracle

#endif  // DPAM_TEST_ORACLES_HPP
