#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "dpam/prox.hpp"
#include "oracles.hpp"

using namespace dpam;
using Eigen::VectorXd;

namespace {

double f_direct(const VectorXd& z, const VectorXd& r, double lam) {
  const double n = static_cast<double>(r.size());
  return 0.5 * (r - z).squaredNorm() + lam * std::sqrt(n) * z.norm();
}

double fstar_direct(const VectorXd& u, const VectorXd& r, double lam) {
  const double n = static_cast<double>(r.size());
  const double h = std::max((u + r).norm() - lam * std::sqrt(n), 0.0);
  return 0.5 * h * h - 0.5 * r.squaredNorm();
}

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(xs.size());
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST_CASE("soft_threshold examples and zero handling") {
  CHECK(soft_threshold(vec({3}), vec({1}))[0] == 2.0);
  const VectorXd z = soft_threshold(vec({0.5, -0.5}), vec({1, 1}));
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);
  CHECK(soft_threshold(vec({0}), vec({2}))[0] == 0.0);
  CHECK(soft_threshold(vec({-3, 1}), vec({1, 1}))[0] == -2.0);
  CHECK_THROWS_AS(soft_threshold(vec({1, 2}), vec({1})), ContractViolation);

  ThresholdSpec spec{vec({1, 1}), 0.0};
  CHECK(soft_threshold(vec({2, -0.5}), spec)[0] == 1.0);
  spec.gamma_vec[0] = -1.0;
  CHECK_THROWS_AS(soft_threshold(vec({2, -0.5}), spec), ContractViolation);
}

TEST_CASE("joint_soft_threshold examples") {
  CHECK(joint_soft_threshold(vec({3, 4}), 5.0).isZero(0.0));
  const VectorXd y = joint_soft_threshold(vec({3, 4}), 2.5);
  CHECK(y[0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(y[1] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(joint_soft_threshold(vec({0, 0}), 1.0).isZero(0.0));
  CHECK_THROWS_AS(joint_soft_threshold(vec({std::nan(""), 1}), 1.0), ContractViolation);
}

TEST_CASE("joint_soft_threshold is zero exactly inside the ball") {
  std::mt19937_64 gen(11);
  for (int t = 0; t < 1000; ++t) {
    const VectorXd x = oracle::randn(gen, 1 + t % 7);
    const double g = oracle::uniform(gen, 0.0, 2.0 * x.norm());
    const VectorXd y = joint_soft_threshold(x, g);
    CHECK((y.isZero(0.0)) == (x.norm() <= g));
    if (!y.isZero(0.0)) {
      const double scale = y.dot(x) / x.squaredNorm();
      CHECK(scale > 0.0);
      CHECK((y - scale * x).norm() <= 1e-12 * x.norm());
    }
  }
}

TEST_CASE("prox_f closed cases") {
  std::mt19937_64 gen(3);
  const VectorXd r = oracle::randn(gen, 5);
  const VectorXd z = oracle::randn(gen, 5);
  const double alpha = 0.7;
  EmpiricalNormTerm t0(r, 0.0);
  CHECK((prox_f(z, alpha, t0) - (z + alpha * r) / (1 + alpha)).norm() < 1e-14);

  EmpiricalNormTerm t1(r, 0.3);
  CHECK(prox_f(-alpha * r, alpha, t1).isZero(0.0));
  CHECK_THROWS_AS(prox_f(z, 0.0, t1), ContractViolation);
  CHECK_THROWS_AS(prox_f(VectorXd::Zero(3), alpha, t1), ContractViolation);
}

TEST_CASE("prox_f agrees with a numeric minimizer") {
  {
    const VectorXd r = vec({1, 0}), z = vec({1, 1});
    const double alpha = 1.0, lam = 0.5;
    EmpiricalNormTerm term(r, lam);
    auto obj = [&](const VectorXd& u) {
      return 0.5 * (u - z).squaredNorm() + alpha * f_direct(u, r, lam);
    };
    const VectorXd ref = oracle::minimize_with_zero_candidate(obj, z, 4.0);
    CHECK((prox_f(z, alpha, term) - ref).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
  std::mt19937_64 gen(5);
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + t % 3;
    const VectorXd r = oracle::randn(gen, n), z = oracle::randn(gen, n);
    const double alpha = oracle::uniform(gen, 0.1, 3.0);
    const double lam = oracle::uniform(gen, 0.0, 1.5);
    EmpiricalNormTerm term(r, lam);
    auto obj = [&](const VectorXd& u) {
      return 0.5 * (u - z).squaredNorm() + alpha * f_direct(u, r, lam);
    };
    const VectorXd ref = oracle::minimize_with_zero_candidate(obj, z, 6.0);
    const VectorXd got = prox_f(z, alpha, term);
    CHECK((got - ref).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("prox_f output beats random nearby points") {
  std::mt19937_64 gen(17);
  for (int t = 0; t < 20; ++t) {
    const int n = 2 + t % 5;
    const VectorXd r = oracle::randn(gen, n), z = oracle::randn(gen, n);
    const double alpha = oracle::uniform(gen, 0.2, 2.0), lam = oracle::uniform(gen, 0.0, 1.0);
    EmpiricalNormTerm term(r, lam);
    auto obj = [&](const VectorXd& u) {
      return 0.5 * (u - z).squaredNorm() + alpha * f_direct(u, r, lam);
    };
    const VectorXd p = prox_f(z, alpha, term);
    const double fp = obj(p);
    for (int k = 0; k < 200; ++k) {
      VectorXd d = oracle::randn(gen, n);
      d *= 1e-3 / d.norm();
      CHECK(fp <= obj(p + d) + 1e-15);
    }
  }
}

TEST_CASE("Moreau identity holds for prox_f_star") {
  std::mt19937_64 gen(23);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int n = 1 + t % 16;
    const VectorXd r = oracle::randn(gen, n, 2.0), x = oracle::randn(gen, n, 2.0);
    const double alpha = oracle::uniform(gen, 0.05, 5.0);
    const double lam = oracle::uniform(gen, 0.0, 2.0);
    EmpiricalNormTerm term(r, lam);
    // prox of f/alpha equals prox_f with parameter 1/alpha.
    const VectorXd rec = prox_f_star(x, alpha, term) + alpha * prox_f(x / alpha, 1.0 / alpha, term);
    worst = std::max(worst, (rec - x).lpNorm<Eigen::Infinity>());
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("prox_f_star closed cases and numeric oracle") {
  std::mt19937_64 gen(29);
  const VectorXd r = oracle::randn(gen, 4);
  EmpiricalNormTerm term(r, 0.4);
  const VectorXd at = prox_f_star(-r, 0.9, term);
  CHECK((at + r).norm() == 0.0);

  EmpiricalNormTerm plain(VectorXd::Zero(4), 0.0);
  const VectorXd x = oracle::randn(gen, 4);
  CHECK((prox_f_star(x, 0.5, plain) - x / 1.5).norm() < 1e-14);

  for (int t = 0; t < 200; ++t) {
    const int n = 3;
    const VectorXd rr = oracle::randn(gen, n), xx = oracle::randn(gen, n, 2.0);
    const double alpha = oracle::uniform(gen, 0.1, 3.0), lam = oracle::uniform(gen, 0.0, 1.0);
    EmpiricalNormTerm tm(rr, lam);
    auto obj = [&](const VectorXd& u) {
      return 0.5 * (u - xx).squaredNorm() + alpha * fstar_direct(u, rr, lam);
    };
    const VectorXd ref = oracle::line_search_min(obj, xx, 8.0);
    CHECK((prox_f_star(xx, alpha, tm) - ref).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("f_star_value is the convex conjugate of f") {
  std::mt19937_64 gen(31);
  const VectorXd r = oracle::randn(gen, 4);
  EmpiricalNormTerm term(r, 0.6);
  CHECK(f_star_value(-r, term) == doctest::Approx(-0.5 * r.squaredNorm()).epsilon(1e-15));
  EmpiricalNormTerm t0(r, 0.0);
  const VectorXd u = oracle::randn(gen, 4);
  CHECK(f_star_value(u, t0) ==
        doctest::Approx(0.5 * (u + r).squaredNorm() - 0.5 * r.squaredNorm()).epsilon(1e-14));

  for (int t = 0; t < 40; ++t) {
    const VectorXd rr = oracle::randn(gen, 4), uu = oracle::randn(gen, 4, 2.0);
    const double lam = oracle::uniform(gen, 0.0, 1.0);
    EmpiricalNormTerm tm(rr, lam);
    // sup_z <u,z> - f(z) = -min_z f(z) - <u,z>
    auto neg = [&](const VectorXd& z) { return f_direct(z, rr, lam) - uu.dot(z); };
    const VectorXd zs = oracle::minimize_with_zero_candidate(neg, rr + uu, 10.0);
    CHECK(f_star_value(uu, tm) == doctest::Approx(-neg(zs)).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("f_star_value is convex along random segments") {
  std::mt19937_64 gen(37);
  for (int t = 0; t < 500; ++t) {
    const int n = 1 + t % 6;
    const VectorXd r = oracle::randn(gen, n);
    EmpiricalNormTerm term(r, oracle::uniform(gen, 0.0, 2.0));
    const VectorXd a = oracle::randn(gen, n, 2.0), b = oracle::randn(gen, n, 2.0);
    const double mid = f_star_value(0.5 * (a + b), term);
    CHECK(mid <= 0.5 * (f_star_value(a, term) + f_star_value(b, term)) + 1e-12);
  }
}

TEST_CASE("grad_f_star matches finite differences away from the hinge") {
  std::mt19937_64 gen(41);
  const VectorXd r = oracle::randn(gen, 5);
  EmpiricalNormTerm term(r, 0.5);
  CHECK(grad_f_star(-r, term).isZero(0.0));
  EmpiricalNormTerm t0(r, 0.0);
  const VectorXd u0 = oracle::randn(gen, 5);
  CHECK((grad_f_star(u0, t0) - (u0 + r)).norm() < 1e-14);

  int tested = 0;
  for (int t = 0; t < 400; ++t) {
    const int n = 1 + t % 8;
    const VectorXd rr = oracle::randn(gen, n), u = oracle::randn(gen, n, 1.5);
    const double lam = oracle::uniform(gen, 0.0, 1.0);
    EmpiricalNormTerm tm(rr, lam);
    if (std::abs((u + rr).norm() - lam * std::sqrt(double(n))) < 1e-3) continue;
    ++tested;
    const VectorXd g = grad_f_star(u, tm);
    const double h = 1e-6;
    for (int j = 0; j < n; ++j) {
      VectorXd up = u, dn = u;
      up[j] += h;
      dn[j] -= h;
      const double fd = (f_star_value(up, tm) - f_star_value(dn, tm)) / (2 * h);
      CHECK(std::abs(fd - g[j]) <= 1e-5 * std::max(1.0, std::abs(g[j])));
    }
  }
  CHECK(tested > 300);
}

TEST_CASE("coord_prox_f_star branches") {
  const double alpha = 0.8, lam = 0.5;
  const int n = 4;
  EmpiricalNormTerm term(VectorXd::Constant(n, 0.1), lam);
  const double rad = lam * 2.0;

  // inside the ball: value is b_i
  CoordinateState in{0.1, 0.2};
  CHECK(coord_prox_f_star(0.3, in, alpha, term) == 0.3);
  // b_i + r_i = 0
  CHECK(coord_prox_f_star(-0.1, in, alpha, term) == -0.1);

  // only coordinate i contributes: closed form
  CoordinateState alone{0.1, 0.0};
  const double b = 2.0, a = b + 0.1;
  const double c = (1 + alpha * rad / a) / (1 + alpha);
  CHECK(coord_prox_f_star(b, alone, alpha, term) == doctest::Approx(c * a - 0.1).epsilon(1e-15));
}

TEST_CASE("coord_prox_f_star agrees with a 1-D numeric minimizer") {
  std::mt19937_64 gen(43);
  int root_cases = 0;
  for (int t = 0; t < 200; ++t) {
    const int n = 3;
    const double alpha = t == 0 ? 0.7 : oracle::uniform(gen, 0.1, 3.0);
    const double lam = t == 0 ? 0.4 : oracle::uniform(gen, 0.0, 1.0);
    const VectorXd r = oracle::randn(gen, n), v = oracle::randn(gen, n);
    const double b = std::normal_distribution<double>(0.0, 1.5)(gen);
    const int i = t % n;
    EmpiricalNormTerm term(r, lam);
    const double S = (v + r).squaredNorm() - (v[i] + r[i]) * (v[i] + r[i]);
    const double got = coord_prox_f_star(b, {r[i], S}, alpha, term);

    auto obj = [&](double vi) {
      VectorXd vv = v;
      vv[i] = vi;
      return 0.5 * (vi - b) * (vi - b) + alpha * fstar_direct(vv, r, lam);
    };
    const double ref = oracle::golden_min(obj, -20.0, 20.0, 4000);
    CHECK(std::abs(got - ref) <= 1e-6);

    const auto det = coord_prox_f_star_detail(b, {r[i], S}, alpha, lam, std::sqrt(3.0));
    if (det.iterations > 0) {
      ++root_cases;
      const double a = b + r[i];
      CHECK(det.c > 0.0);
      CHECK(det.c < 1.0);
      const double resid =
          (1 + alpha - alpha * lam * std::sqrt(3.0) / std::sqrt(det.c * det.c * a * a + S)) *
              det.c - 1.0;
      CHECK(std::abs(resid) <= 1e-12);
    }
  }
  CHECK(root_cases > 20);
}

TEST_CASE("single_block_objective evaluations") {
  Eigen::MatrixXd X(4, 2);
  X << 1, 2, -1, 0.5, 0.3, -2, 2, 1;
  const VectorXd r = vec({1, -1, 0.5, 2});
  SingleBlockProblem prob(X, r, vec({0.1, 0.3}), 0.25, 0.0);
  CHECK(single_block_objective(VectorXd::Zero(2), prob) ==
        doctest::Approx(r.squaredNorm() / 8.0).epsilon(1e-15));
  const VectorXd beta = vec({0.4, -0.7});
  CHECK(single_block_objective(beta, prob) ==
        doctest::Approx(oracle::block_objective(X, r, prob.gamma_diag, 0.25, beta)).epsilon(1e-14));

  Eigen::MatrixXd Q(3, 3);
  Q << 2, 1, 0, 0, 1, 1, 1, 0, 3;
  const VectorXd rq = vec({1, 2, 3});
  SingleBlockProblem sq(Q, rq, VectorXd::Zero(3), 0.0, 0.0);
  const VectorXd sol = Q.lu().solve(rq);
  CHECK(single_block_objective(sol, sq) == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
}
