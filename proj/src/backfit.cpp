#include "dpam/backfit.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "dpam/errors.hpp"
#include "dpam/prox.hpp"
#include "dpam/rng.hpp"

namespace dpam {

namespace {

constexpr double kOracleTol = 1e-10;
constexpr std::uint64_t kVisitStream = 0x4246;

// Shared by training and prediction so both paths round identically.
void accumulate_block(Eigen::VectorXd& f, const Eigen::MatrixXd& basis,
                      const Eigen::VectorXd& coef) {
  for (Eigen::Index j = 0; j < coef.size(); ++j)
    if (coef[j] != 0.0) f += coef[j] * basis.col(j);
}

double norm_n(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
}

double logistic_loss(const Eigen::VectorXd& f, const Eigen::VectorXd& y) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const double fi = f[i];
    const double softplus = fi > 0 ? fi + std::log1p(std::exp(-fi)) : std::log1p(std::exp(fi));
    s += softplus - y[i] * fi;
  }
  return s / static_cast<double>(f.size());
}

Eigen::VectorXd expit(const Eigen::VectorXd& f) {
  return f.unaryExpr([](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

struct Caches {
  std::vector<Eigen::MatrixXd> gram;
  std::vector<RowMatrix> rows;
};

SolveReport solve_block(const TrainConfig& cfg, const SingleBlockProblem& prob,
                        const Eigen::VectorXd& beta0, const Eigen::VectorXd* tilde0,
                        std::uint64_t seed) {
  const int steps = cfg.batch_steps_per_block;
  switch (cfg.solver) {
    case Solver::CP:
      return solve_cp_batch(prob, steps, cfg.sizes.value_or(default_cp_sizes(prob)),
                            initial_state(prob, beta0), false);
    case Solver::AMA:
      return solve_ama_batch(prob, steps, cfg.sizes.value_or(default_ama_sizes(prob)),
                             initial_state(prob, beta0), false);
    case Solver::CondatVu:
      return solve_condat_vu(prob, steps, cfg.sizes.value_or(default_condat_vu_sizes(prob)),
                             initial_state(prob, beta0), false);
    case Solver::StocCP:
      return solve_cp_stochastic(prob, steps,
                                 cfg.sizes.value_or(default_stochastic_cp_sizes(prob)),
                                 initial_state(prob, beta0), seed, false);
    case Solver::StocAMA_SAG:
      return solve_ama_stochastic(
          prob, steps, cfg.sizes.value_or(default_stochastic_ama_sizes(prob, SagVariant::SAG)),
          initial_state(prob, beta0), seed, SagVariant::SAG, false);
    case Solver::StocAMA_SAGA:
      return solve_ama_stochastic(
          prob, steps, cfg.sizes.value_or(default_stochastic_ama_sizes(prob, SagVariant::SAGA)),
          initial_state(prob, beta0), seed, SagVariant::SAGA, false);
    case Solver::CC:
      return solve_cc_batch(prob, steps, cfg.delta, beta0, false);
    case Solver::StocCC:
      return solve_cc_stochastic(prob, steps, cfg.cc_tau.value_or(default_stochastic_cc_tau(prob)),
                                 cfg.delta, beta0, seed, false);
    case Solver::Oracle:
      return solve_oracle(prob, kOracleTol, tilde0);
  }
  throw ContractViolation("solve_block: unknown solver");
}

// Backfitting over centered blocks. The link-specific parts (working
// response, intercept update, loss) are supplied by the caller.
struct Backfitter {
  const TrainConfig& cfg;
  std::vector<DesignBlock>& blocks;
  double lam;
  bool logistic;
  double penalty_scale;  // 1 for least squares, 4 for the logistic majorizer
  Eigen::Index n;

  std::vector<Eigen::VectorXd> beta, tilde, fit;
  std::vector<double> pen;
  Eigen::VectorXd total;  // sum of block fits
  double intercept = 0.0;
  Caches caches;
  std::vector<Eigen::VectorXd> scaled_gamma;

  // (intercept, total fit) -> loss; (intercept, total, block fit) -> (residual, new intercept)
  std::function<double(double, const Eigen::VectorXd&)> loss;
  std::function<std::pair<Eigen::VectorXd, double>(double, const Eigen::VectorXd&,
                                                   const Eigen::VectorXd&)>
      working;

  Backfitter(const TrainConfig& c, std::vector<DesignBlock>& b, double l, bool is_logistic)
      : cfg(c),
        blocks(b),
        lam(l),
        logistic(is_logistic),
        penalty_scale(is_logistic ? 4.0 : 1.0),
        n(b.empty() ? 0 : b[0].basis.rows()) {
    const std::size_t K = blocks.size();
    beta.resize(K);
    tilde.resize(K);
    fit.assign(K, Eigen::VectorXd::Zero(n));
    pen.assign(K, 0.0);
    total = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < K; ++k) {
      beta[k] = Eigen::VectorXd::Zero(blocks[k].dim());
      scaled_gamma.push_back(penalty_scale * blocks[k].gamma_diag);
    }
    if (cfg.solver == Solver::Oracle) {
      caches.gram.resize(K);
      for (std::size_t k = 0; k < K; ++k)
        caches.gram[k] = blocks[k].basis.transpose() * blocks[k].basis / static_cast<double>(n);
    }
    if (is_stochastic(cfg.solver)) {
      caches.rows.resize(K);
      for (std::size_t k = 0; k < K; ++k) caches.rows[k] = blocks[k].basis;
    }
  }

  double block_penalty(std::size_t k, const Eigen::VectorXd& b, const Eigen::VectorXd& f) const {
    return blocks[k].gamma_diag.cwiseProduct(b).lpNorm<1>() + lam * norm_n(f);
  }

  double objective() const {
    double s = loss(intercept, total);
    for (double v : pen) s += v;
    return s;
  }

  int nonzero_blocks() const {
    int c = 0;
    for (const auto& b : beta) c += b.isZero(0.0) ? 0 : 1;
    return c;
  }

  long nonzero_coefs() const {
    long c = 0;
    for (const auto& b : beta) c += static_cast<long>((b.array() != 0.0).count());
    return c;
  }

  void record(TrainTrace& tr, double epoch, double obj) const {
    tr.epoch_marks.push_back(epoch);
    tr.objective.push_back(obj);
    tr.nonzero_blocks.push_back(nonzero_blocks());
    tr.nonzero_coefs.push_back(nonzero_coefs());
  }

  TrainTrace run() {
    TrainTrace tr;
    double epoch = 0.0;
    double prev = objective();
    record(tr, epoch, prev);
    std::uint64_t visit = 0;

    // The slack absorbs rounding in the summed per-block epoch costs.
    while (epoch < cfg.max_epochs - 1e-9) {
      for (std::size_t k = 0; k < blocks.size(); ++k) {
        const DesignBlock& blk = blocks[k];
        auto [resid, new_intercept] = working(intercept, total, fit[k]);
        SingleBlockProblem prob(blk.basis, std::move(resid), scaled_gamma[k],
                                penalty_scale * lam, blk.spectral_norm_sq,
                                caches.gram.empty() ? nullptr : &caches.gram[k],
                                caches.rows.empty() ? nullptr : &caches.rows[k]);
        const std::uint64_t seed = stream_key(stream_key(cfg.seed, kVisitStream), visit++);
        SolveReport rep;
        try {
          rep = solve_block(cfg, prob, beta[k], tilde[k].size() ? &tilde[k] : nullptr, seed);
        } catch (const DivergenceError& e) {
          throw DivergenceError(e.message() + " in block " + block_label(blk.id),
                                e.step());
        }

        Eigen::VectorXd new_fit = Eigen::VectorXd::Zero(n);
        accumulate_block(new_fit, blk.basis, rep.beta_hat);
        const double new_pen = block_penalty(k, rep.beta_hat, new_fit);

        const double pre = objective();
        const Eigen::VectorXd saved_beta = beta[k];
        const Eigen::VectorXd saved_fit = fit[k];
        const double saved_pen = pen[k], saved_intercept = intercept;
        const Eigen::VectorXd saved_total = total;

        total += new_fit - fit[k];
        fit[k] = std::move(new_fit);
        pen[k] = new_pen;
        beta[k] = rep.beta_hat;
        intercept = new_intercept;

        bool kept = true;
        const double post = objective();
        tr.worst_block_increase = std::max(tr.worst_block_increase, post - pre);
        if (cfg.recovery_enabled) {
          if (check_and_recovery(pre, post, beta[k], saved_beta) == RecoveryOutcome::Reverted) {
            fit[k] = saved_fit;
            pen[k] = saved_pen;
            intercept = saved_intercept;
            total = saved_total;
            tr.recoveries.emplace_back(tr.cycles, blk.id);
            kept = false;
          }
        }
        if (kept && cfg.solver == Solver::Oracle) tilde[k] = rep.final_state.beta;

        epoch += epoch_cost(blk, rep.scans_used, blocks);
        if (cfg.recovery_enabled) record(tr, epoch, objective());
      }
      ++tr.cycles;

      // Refresh the running sum to shed accumulated rounding.
      total.setZero();
      for (const auto& f : fit) total += f;
      const double obj = objective();
      if (!std::isfinite(obj))
        throw NumericError("backfitting objective became non-finite in cycle " +
                           std::to_string(tr.cycles));
      if (!cfg.recovery_enabled) record(tr, epoch, obj);
      if (std::abs(prev - obj) < cfg.tolerance(logistic)) {
        tr.converged = true;
        break;
      }
      prev = obj;
    }
    return tr;
  }
};

DpamModel model_skeleton(const std::vector<DesignBlock>& blocks, const KnotGrid& knots,
                         const FactorMeans& factor_means, const BasisParams& params, double rho,
                         double lam, int p) {
  DpamModel m;
  m.p = p;
  m.knots = knots;
  m.factor_means = factor_means;
  m.m = params.m;
  m.K = params.K;
  m.rho = rho;
  m.lam = lam;
  for (const auto& b : blocks) {
    m.blocks.push_back(b.id);
    m.col_means.push_back(b.col_means);
  }
  return m;
}

void check_inputs(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TrainConfig& cfg,
                  const BasisParams& params, double rho, double lam, const char* who) {
  cfg.validate();
  if (X.rows() < 2) throw ContractViolation(std::string(who) + ": need n >= 2");
  if (y.size() != X.rows()) throw ContractViolation(std::string(who) + ": y length != rows of X");
  if (!X.allFinite() || !y.allFinite())
    throw ContractViolation(std::string(who) + ": non-finite input");
  if (params.m != 1 && params.m != 2) throw ContractViolation(std::string(who) + ": m must be 1 or 2");
  if (params.K < 1 || params.K > X.cols())
    throw ContractViolation(std::string(who) + ": K must be in 1..p");
  if (!(rho >= 0.0) || !(lam >= 0.0))
    throw ContractViolation(std::string(who) + ": rho and lam must be >= 0");
}

}  // namespace

Solver parse_solver(const std::string& name) {
  static const std::pair<const char*, Solver> table[] = {
      {"cp", Solver::CP},           {"ama", Solver::AMA},
      {"stoc-cp", Solver::StocCP},  {"stoc-ama-sag", Solver::StocAMA_SAG},
      {"stoc-ama-saga", Solver::StocAMA_SAGA},
      {"cc", Solver::CC},           {"stoc-cc", Solver::StocCC},
      {"condat-vu", Solver::CondatVu}, {"oracle", Solver::Oracle}};
  for (const auto& [key, s] : table)
    if (name == key) return s;
  throw ConfigError("unknown solver '" + name + "'");
}

std::string solver_name(Solver s) {
  switch (s) {
    case Solver::CP: return "cp";
    case Solver::AMA: return "ama";
    case Solver::StocCP: return "stoc-cp";
    case Solver::StocAMA_SAG: return "stoc-ama-sag";
    case Solver::StocAMA_SAGA: return "stoc-ama-saga";
    case Solver::CC: return "cc";
    case Solver::StocCC: return "stoc-cc";
    case Solver::CondatVu: return "condat-vu";
    case Solver::Oracle: return "oracle";
  }
  return "?";
}

bool is_stochastic(Solver s) {
  return s == Solver::StocCP || s == Solver::StocAMA_SAG || s == Solver::StocAMA_SAGA ||
         s == Solver::StocCC;
}

void TrainConfig::validate() const {
  if (batch_steps_per_block < 1)
    throw ContractViolation("TrainConfig: batch_steps_per_block must be >= 1");
  if (obj_tolerance && !(*obj_tolerance > 0.0)) throw ContractViolation("TrainConfig: obj_tolerance must be > 0");
  if (!(max_epochs > 0.0)) throw ContractViolation("TrainConfig: max_epochs must be > 0");
  if (!(delta > 0.0)) throw ContractViolation("TrainConfig: delta must be > 0");
  if (sizes) sizes->validate();
  if (cc_tau && !(*cc_tau > 0.0)) throw ContractViolation("TrainConfig: cc_tau must be > 0");
}

int DpamModel::nonzero_blocks() const {
  int c = 0;
  for (const auto& b : coefs) c += b.isZero(0.0) ? 0 : 1;
  return c;
}

long DpamModel::nonzero_coefs() const {
  long c = 0;
  for (const auto& b : coefs) c += static_cast<long>((b.array() != 0.0).count());
  return c;
}

double epoch_cost(const DesignBlock& block, double scans, const std::vector<DesignBlock>& blocks) {
  if (!(scans >= 0.0)) throw ContractViolation("epoch_cost: scans must be >= 0");
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.dim();
  if (total == 0) throw ContractViolation("epoch_cost: empty design");
  return scans * static_cast<double>(block.dim()) / static_cast<double>(total);
}

RecoveryOutcome check_and_recovery(double pre_loss, double post_loss, Eigen::VectorXd& coef,
                                   const Eigen::VectorXd& saved) {
  if (post_loss > pre_loss) {
    coef = saved;
    return RecoveryOutcome::Reverted;
  }
  return RecoveryOutcome::Kept;
}

double centered_norm_n(const Eigen::VectorXd& y) {
  return norm_n((y.array() - y.mean()).matrix());
}

FitResult fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TrainConfig& config,
                     const BasisParams& params, double rho, double lam) {
  check_inputs(X, y, config, params, rho, lam, "fit_linear");
  const KnotGrid knots = compute_knot_grid(X, params.num_knots);
  const FactorMeans factor_means = univariate_means(X, knots, params.m);
  std::vector<DesignBlock> blocks = build_design(X, knots, params, rho, &factor_means);
  const double ybar = y.mean();
  const Eigen::VectorXd yc = (y.array() - ybar).matrix();
  const double n = static_cast<double>(X.rows());

  Backfitter bf(config, blocks, lam, false);
  bf.loss = [&](double, const Eigen::VectorXd& total) {
    return 0.5 / n * (yc - total).squaredNorm();
  };
  bf.working = [&](double, const Eigen::VectorXd& total, const Eigen::VectorXd& own) {
    return std::make_pair(Eigen::VectorXd(yc - total + own), 0.0);
  };

  FitResult out;
  out.trace = bf.run();
  out.model = model_skeleton(blocks, knots, factor_means, params, rho, lam, static_cast<int>(X.cols()));
  out.model.intercept = ybar;
  out.model.coefs = bf.beta;
  out.fitted = Eigen::VectorXd::Constant(X.rows(), ybar);
  for (std::size_t k = 0; k < blocks.size(); ++k)
    accumulate_block(out.fitted, blocks[k].basis, bf.beta[k]);
  return out;
}

FitResult fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const TrainConfig& config, const BasisParams& params, double rho,
                       double lam) {
  check_inputs(X, y, config, params, rho, lam, "fit_logistic");
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y[i] != 0.0 && y[i] != 1.0) throw ContractViolation("fit_logistic: y must be 0/1");
  const KnotGrid knots = compute_knot_grid(X, params.num_knots);
  const FactorMeans factor_means = univariate_means(X, knots, params.m);
  std::vector<DesignBlock> blocks = build_design(X, knots, params, rho, &factor_means);

  Backfitter bf(config, blocks, lam, true);
  bf.loss = [&](double b0, const Eigen::VectorXd& total) {
    return logistic_loss((total.array() + b0).matrix(), y);
  };
  // Quadratic majorizer with curvature 1/4 at the current fit; the intercept
  // moves to the mean of the working response.
  bf.working = [&](double b0, const Eigen::VectorXd& total, const Eigen::VectorXd& own) {
    const Eigen::VectorXd phat = expit((total.array() + b0).matrix());
    Eigen::VectorXd r = (own.array() + b0).matrix() + 4.0 * (y - phat);
    const double rbar = r.mean();
    r.array() -= rbar;
    return std::make_pair(std::move(r), rbar);
  };

  FitResult out;
  out.trace = bf.run();
  out.model = model_skeleton(blocks, knots, factor_means, params, rho, lam, static_cast<int>(X.cols()));
  out.model.logistic = true;
  out.model.intercept = bf.intercept;
  out.model.coefs = bf.beta;
  out.fitted = Eigen::VectorXd::Constant(X.rows(), bf.intercept);
  for (std::size_t k = 0; k < blocks.size(); ++k)
    accumulate_block(out.fitted, blocks[k].basis, bf.beta[k]);
  return out;
}

Eigen::VectorXd predict_link(const DpamModel& model, const Eigen::MatrixXd& X_new) {
  if (X_new.cols() != model.p)
    throw ContractViolation("predict: expected " + std::to_string(model.p) + " columns, got " +
                            std::to_string(X_new.cols()));
  if (model.coefs.size() != model.blocks.size() || model.col_means.size() != model.blocks.size())
    throw ContractViolation("predict: inconsistent model");
  Eigen::MatrixXd Xt = X_new;
  if (model.input_center.size() == model.p) Xt.rowwise() -= model.input_center;
  if (model.input_scale.size() == model.p) Xt.array().rowwise() /= model.input_scale.array();

  Eigen::VectorXd f = Eigen::VectorXd::Constant(X_new.rows(), model.intercept);
  for (std::size_t k = 0; k < model.blocks.size(); ++k) {
    if (model.coefs[k].isZero(0.0)) continue;
    const Eigen::MatrixXd basis =
        center_columns(raw_block_basis(model.blocks[k], Xt, model.knots, model.m, &model.factor_means),
                       model.col_means[k]);
    if (basis.cols() != model.coefs[k].size())
      throw ContractViolation("predict: coefficient length mismatch in block " +
                              block_label(model.blocks[k]));
    accumulate_block(f, basis, model.coefs[k]);
  }
  return f;
}

Eigen::VectorXd predict(const DpamModel& model, const Eigen::MatrixXd& X_new) {
  Eigen::VectorXd f = predict_link(model, X_new);
  return model.logistic ? expit(f) : f;
}

}  // namespace dpam
