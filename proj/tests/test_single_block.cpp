#include <doctest.h>

#include <cmath>
#include <random>

#include "dpam/basis.hpp"
#include "dpam/prox.hpp"
#include "dpam/single_block.hpp"
#include "oracles.hpp"

using namespace dpam;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Instance {
  MatrixXd X;
  VectorXd r;
  VectorXd gamma;
  double norm_sq;
};

Instance make_instance(std::mt19937_64& gen, Eigen::Index n, Eigen::Index d, double rho) {
  Instance in;
  in.X = oracle::randn_matrix(gen, n, d);
  VectorXd truth = oracle::randn(gen, d);
  for (Eigen::Index j = 0; j < d; j += 3) truth[j] = 0.0;
  in.r = in.X * truth + oracle::randn(gen, n, 0.5);
  in.gamma = VectorXd::Constant(d, rho);
  in.norm_sq = spectral_norm_sq(in.X);
  return in;
}

// lambda_0 of an instance: empirical norm of the Lasso fit, from the
// independent accelerated proximal-gradient oracle.
double lambda_zero(const Instance& in) {
  const VectorXd b = oracle::lasso_ista(in.X, in.r, in.gamma, 20000);
  return (in.X * b).norm() / std::sqrt(double(in.X.rows()));
}

double oracle_optimum(const Instance& in, double lam) {
  SingleBlockProblem prob(in.X, in.r, in.gamma, lam, in.norm_sq);
  return single_block_objective(solve_oracle(prob).beta_hat, prob);
}

}  // namespace

TEST_CASE("batch solvers on a one-dimensional least-squares instance") {
  MatrixXd X(1, 1);
  X << 1.0;
  VectorXd r(1), g(1);
  r << 1.0;
  g << 0.0;
  SingleBlockProblem prob(X, r, g, 0.0, 1.0);
  const auto init = initial_state(prob);
  CHECK(solve_cp_batch(prob, 500, default_cp_sizes(prob), init).beta_hat[0] ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(solve_ama_batch(prob, 500, default_ama_sizes(prob), init).beta_hat[0] ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(solve_condat_vu(prob, 500, default_condat_vu_sizes(prob), init).beta_hat[0] ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(solve_cc_batch(prob, 500, 1e-6, VectorXd::Zero(1)).beta_hat[0] ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(solve_cp_stochastic(prob, 500, {0.5, 1.0}, init, 1).beta_hat[0] ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(solve_ama_stochastic(prob, 500, {0.5, 1.0}, init, 1, SagVariant::SAG).beta_hat[0] ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(solve_ama_stochastic(prob, 500, {0.5, 1.0}, init, 1, SagVariant::SAGA).beta_hat[0] ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(solve_cc_stochastic(prob, 500, 0.3, 1e-6, VectorXd::Zero(1), 1).beta_hat[0] ==
        doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("lasso_exact: orthogonal design, least squares and KKT certificate") {
  std::mt19937_64 gen(10);
  const Eigen::Index n = 40, d = 5;
  Eigen::HouseholderQR<MatrixXd> qr(oracle::randn_matrix(gen, n, d));
  const MatrixXd Q = MatrixXd(qr.householderQ()).leftCols(d) * std::sqrt(double(n));
  const VectorXd r = oracle::randn(gen, n);
  const double gam = 0.15;
  SingleBlockProblem orth(Q, r, VectorXd::Constant(d, gam), 0.0, double(n));
  const VectorXd b = lasso_exact(orth, 1e-12);
  const VectorXd c = Q.transpose() * r / double(n);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double expect = c[j] > gam ? c[j] - gam : (c[j] < -gam ? c[j] + gam : 0.0);
    CHECK(b[j] == doctest::Approx(expect).epsilon(1e-10).scale(1.0));
  }

  const MatrixXd X = oracle::randn_matrix(gen, 100, 8);
  const VectorXd y = oracle::randn(gen, 100);
  SingleBlockProblem ls(X, y, VectorXd::Zero(8), 0.0, 1.0);
  const VectorXd direct = (X.transpose() * X).ldlt().solve(X.transpose() * y);
  CHECK((lasso_exact(ls, 1e-12) - direct).norm() <= 1e-9);

  for (int t = 0; t < 10; ++t) {
    const Instance in = make_instance(gen, 100, 8, 0.05 + 0.05 * t);
    SingleBlockProblem prob(in.X, in.r, in.gamma, 0.0, in.norm_sq);
    const VectorXd bt = lasso_exact(prob, 1e-10);
    CHECK(lasso_kkt_residual(prob, bt) <= 1e-8);
    const VectorXd ref = oracle::lasso_ista(in.X, in.r, in.gamma, 20000);
    CHECK((bt - ref).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("threshold_lasso_solution cases") {
  std::mt19937_64 gen(11);
  const Instance in = make_instance(gen, 30, 4, 0.1);
  SingleBlockProblem prob(in.X, in.r, in.gamma, 0.0, in.norm_sq);
  CHECK(threshold_lasso_solution(VectorXd::Zero(4), prob).isZero(0.0));
  const VectorXd bt = oracle::randn(gen, 4);
  const double nrm = (in.X * bt).norm() / std::sqrt(30.0);
  SingleBlockProblem big(in.X, in.r, in.gamma, nrm * 1.01, in.norm_sq);
  CHECK(threshold_lasso_solution(bt, big).isZero(0.0));
  SingleBlockProblem half(in.X, in.r, in.gamma, nrm / 2, in.norm_sq);
  CHECK((threshold_lasso_solution(bt, half) - bt / 2).norm() <= 1e-14);

  // X beta_hat = T(X beta_tilde, lam sqrt(n))
  SingleBlockProblem mid(in.X, in.r, in.gamma, nrm / 3, in.norm_sq);
  const VectorXd bh = threshold_lasso_solution(bt, mid);
  CHECK((in.X * bh - joint_soft_threshold(in.X * bt, nrm / 3 * std::sqrt(30.0))).norm() <= 1e-12);
}

TEST_CASE("batch primal-dual solvers reach the oracle optimum") {
  std::mt19937_64 gen(12);
  for (int t = 0; t < 3; ++t) {
    const Instance in = make_instance(gen, 200, 10, 0.02);
    const double lam = lambda_zero(in) / 4;
    SingleBlockProblem prob(in.X, in.r, in.gamma, lam, in.norm_sq);
    const double opt = oracle_optimum(in, lam);
    const auto init = initial_state(prob);
    const auto cp = solve_cp_batch(prob, 4000, default_cp_sizes(prob), init);
    const auto ama = solve_ama_batch(prob, 4000, default_ama_sizes(prob), init);
    const auto cv = solve_condat_vu(prob, 4000, default_condat_vu_sizes(prob), init);
    CHECK(cp.step_feasible);
    CHECK(ama.step_feasible);
    CHECK(cv.step_feasible);
    CHECK(single_block_objective(cp.beta_hat, prob) - opt <= 1e-5);
    CHECK(single_block_objective(ama.beta_hat, prob) - opt <= 1e-5);
    CHECK(single_block_objective(cv.beta_hat, prob) - opt <= 1e-5);
    CHECK(single_block_objective(cp.beta_hat, prob) >= opt - 1e-10);
    CHECK(cp.objective_trace.size() == 4000);
    CHECK(cp.objective_trace.back() ==
          doctest::Approx(single_block_objective(cp.final_state.beta, prob)).epsilon(1e-14));
  }
}

TEST_CASE("zero regime: lam = 2 lam0 gives an exact zero after reset") {
  std::mt19937_64 gen(13);
  for (int t = 0; t < 4; ++t) {
    const Instance in = make_instance(gen, 200, 10, 0.05);
    const double lam = 2 * lambda_zero(in);
    SingleBlockProblem prob(in.X, in.r, in.gamma, lam, in.norm_sq);
    const auto init = initial_state(prob);
    const double at_zero = in.r.squaredNorm() / 400.0;
    for (const auto& rep : {solve_cp_batch(prob, 300, default_cp_sizes(prob), init),
                            solve_ama_batch(prob, 300, default_ama_sizes(prob), init),
                            solve_cp_stochastic(prob, 30, default_stochastic_cp_sizes(prob),
                                                init, 5),
                            solve_ama_stochastic(prob, 30, default_stochastic_ama_sizes(prob),
                                                 init, 5, SagVariant::SAG)}) {
      CHECK(rep.was_reset_to_zero);
      CHECK(rep.beta_hat.isZero(0.0));
      CHECK(single_block_objective(rep.beta_hat, prob) == at_zero);
    }
    CHECK(solve_oracle(prob).beta_hat.isZero(0.0));
  }
}

TEST_CASE("batch iterates carry exact zeros under a dominant penalty entry") {
  std::mt19937_64 gen(14);
  Instance in = make_instance(gen, 100, 6, 0.01);
  in.gamma[2] = 100.0;
  SingleBlockProblem prob(in.X, in.r, in.gamma, 0.05, in.norm_sq);
  const auto init = initial_state(prob);
  CHECK(solve_cp_batch(prob, 50, default_cp_sizes(prob), init).final_state.beta[2] == 0.0);
  CHECK(solve_ama_batch(prob, 50, default_ama_sizes(prob), init).final_state.beta[2] == 0.0);
  CHECK(solve_condat_vu(prob, 50, default_condat_vu_sizes(prob), init).final_state.beta[2] ==
        0.0);
}

TEST_CASE("stochastic bookkeeping and determinism") {
  std::mt19937_64 gen(15);
  const Instance in = make_instance(gen, 300, 12, 0.02);
  const double lam = lambda_zero(in) / 4;
  SingleBlockProblem prob(in.X, in.r, in.gamma, lam, in.norm_sq);
  const auto init = initial_state(prob);
  const double n = 300.0;

  const auto cp = solve_cp_stochastic(prob, 7, default_stochastic_cp_sizes(prob), init, 99);
  const VectorXd& v = cp.final_state.dual;
  CHECK((cp.final_state.w - in.X.transpose() * v / n).lpNorm<Eigen::Infinity>() <= 1e-8);
  CHECK(std::abs(cp.final_state.L2 - (v + in.r).squaredNorm()) <= 1e-8 * (1 + cp.final_state.L2));
  const auto cp2 = solve_cp_stochastic(prob, 7, default_stochastic_cp_sizes(prob), init, 99);
  CHECK((cp.beta_hat.array() == cp2.beta_hat.array()).all());
  CHECK(cp.objective_trace == cp2.objective_trace);
  const auto cp3 = solve_cp_stochastic(prob, 7, default_stochastic_cp_sizes(prob), init, 100);
  CHECK(!(cp.beta_hat.array() == cp3.beta_hat.array()).all());

  for (auto var : {SagVariant::SAG, SagVariant::SAGA}) {
    const auto am = solve_ama_stochastic(prob, 7, default_stochastic_ama_sizes(prob, var), init, 3, var);
    const VectorXd& u = am.final_state.dual;
    CHECK((am.final_state.w - in.X.transpose() * u / n).lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(std::abs(am.final_state.L2 - (u + in.r).squaredNorm()) <=
          1e-8 * (1 + am.final_state.L2));
    const auto am2 =
        solve_ama_stochastic(prob, 7, default_stochastic_ama_sizes(prob, var), init, 3, var);
    CHECK(am.objective_trace == am2.objective_trace);
  }

  const auto cc = solve_cc_stochastic(prob, 4, default_stochastic_cc_tau(prob), 1e-6,
                                      VectorXd::Zero(12), 8);
  // w is tied to the v of the final outer iteration
  CHECK((cc.final_state.w - in.X.transpose() * cc.final_state.dual / n)
            .lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("stochastic solvers approach the oracle optimum") {
  std::mt19937_64 gen(16);
  const Instance in = make_instance(gen, 2000, 25, 0.02);
  const double lam = lambda_zero(in) / 4;
  SingleBlockProblem prob(in.X, in.r, in.gamma, lam, in.norm_sq);
  const double opt = oracle_optimum(in, lam);
  const auto init = initial_state(prob);
  double cp_mean = 0, sag_mean = 0, saga_mean = 0, cc_mean = 0;
  const int seeds = 10;
  for (int s = 0; s < seeds; ++s) {
    cp_mean += single_block_objective(
        solve_cp_stochastic(prob, 30, default_stochastic_cp_sizes(prob), init, s).beta_hat, prob);
    sag_mean += single_block_objective(
        solve_ama_stochastic(prob, 30, default_stochastic_ama_sizes(prob), init, s,
                             SagVariant::SAG).beta_hat, prob);
    saga_mean += single_block_objective(
        solve_ama_stochastic(prob, 30, default_stochastic_ama_sizes(prob, SagVariant::SAGA),
                             init, s, SagVariant::SAGA).beta_hat, prob);
    cc_mean += single_block_objective(
        solve_cc_stochastic(prob, 30, default_stochastic_cc_tau(prob), 1e-6,
                            VectorXd::Zero(25), s).beta_hat, prob);
  }
  CHECK(cp_mean / seeds - opt <= 1e-3);
  CHECK(sag_mean / seeds - opt <= 1e-3);
  CHECK(saga_mean / seeds - opt <= 1e-3);
  CHECK(cc_mean / seeds - opt <= 5e-3);
}

TEST_CASE("concave-conjugate solvers") {
  std::mt19937_64 gen(17);
  const Instance in = make_instance(gen, 150, 8, 0.03);
  const double delta = 1e-6;

  SingleBlockProblem plain(in.X, in.r, in.gamma, 0.0, in.norm_sq);
  const VectorXd lasso = lasso_exact(plain, 1e-12);
  CHECK((solve_cc_batch(plain, 3000, delta, VectorXd::Zero(8)).beta_hat - lasso)
            .lpNorm<Eigen::Infinity>() <= 1e-5);

  const double lam = lambda_zero(in) / 4;
  SingleBlockProblem prob(in.X, in.r, in.gamma, lam, in.norm_sq);
  const auto rep = solve_cc_batch(prob, 3000, delta, VectorXd::Zero(8));
  for (std::size_t k = 1; k < rep.perturbed_trace.size(); ++k)
    CHECK(rep.perturbed_trace[k] <= rep.perturbed_trace[k - 1] + 1e-10);
  CHECK(rep.perturbed_trace.front() < perturbed_objective(VectorXd::Zero(8), prob, delta));

  // fixed point: restarting at the converged iterate barely moves it
  const auto again = solve_cc_batch(prob, 5, delta, rep.beta_hat);
  CHECK((again.beta_hat - rep.beta_hat).lpNorm<Eigen::Infinity>() <= 1e-10);
  CHECK(perturbed_objective(rep.beta_hat, prob, delta) - oracle_optimum(in, lam) <= 1e-3);
}

TEST_CASE("Condat-Vu keeps the dual in the ball") {
  std::mt19937_64 gen(18);
  const Instance in = make_instance(gen, 120, 6, 0.03);
  const double lam = lambda_zero(in) / 3;
  SingleBlockProblem prob(in.X, in.r, in.gamma, lam, in.norm_sq);
  const auto sizes = default_condat_vu_sizes(prob);
  auto state = initial_state(prob);
  for (int k = 0; k < 50; ++k) {
    const auto rep = solve_condat_vu(prob, 1, sizes, state);
    CHECK(rep.final_state.dual.norm() <= lam * std::sqrt(120.0) + 1e-12);
    state.beta = rep.final_state.beta;
    state.beta_prev = rep.final_state.beta;
    state.dual = rep.final_state.dual;
  }

  SingleBlockProblem zero_lam(in.X, in.r, in.gamma, 0.0, in.norm_sq);
  const auto rep0 = solve_condat_vu(zero_lam, 20, default_condat_vu_sizes(zero_lam),
                                    initial_state(zero_lam));
  CHECK(rep0.final_state.dual.isZero(0.0));
  CHECK(!default_condat_vu_sizes(prob).condat_vu_feasible(in.norm_sq * 2, 120));
}

TEST_CASE("divergent step sizes are reported with a step index") {
  std::mt19937_64 gen(19);
  const Instance in = make_instance(gen, 50, 4, 0.0);
  SingleBlockProblem prob(in.X, in.r, in.gamma, 0.0, in.norm_sq);
  const StepSizes huge{1e6 * 50 / in.norm_sq, 1.0};
  CHECK_THROWS_AS(solve_ama_batch(prob, 2000, huge, initial_state(prob)), DivergenceError);
  CHECK(!huge.cp_feasible(in.norm_sq, 50));
}
