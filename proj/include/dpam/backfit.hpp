#ifndef DPAM_BACKFIT_HPP
#define DPAM_BACKFIT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dpam/basis.hpp"
#include "dpam/single_block.hpp"

namespace dpam {

enum class Solver { CP, AMA, StocCP, StocAMA_SAG, StocAMA_SAGA, CC, StocCC, CondatVu, Oracle };

Solver parse_solver(const std::string& name);
std::string solver_name(Solver s);
bool is_stochastic(Solver s);

struct TrainConfig {
  Solver solver = Solver::Oracle;
  int batch_steps_per_block = 6;
  double max_epochs = 100.0;
  // Unset: 1e-3 for least squares, 1e-4 for logistic.
  std::optional<double> obj_tolerance;
  // Unset: each block uses the solver's default sizes for its own design.
  std::optional<StepSizes> sizes;
  // Stochastic CC inner step; unset uses default_stochastic_cc_tau.
  std::optional<double> cc_tau;
  double delta = 1e-6;
  std::uint64_t seed = 1;
  bool recovery_enabled = false;

  void validate() const;
  double tolerance(bool logistic) const { return obj_tolerance.value_or(logistic ? 1e-4 : 1e-3); }
};

struct TrainTrace {
  std::vector<double> epoch_marks;
  std::vector<double> objective;
  std::vector<int> nonzero_blocks;
  std::vector<long> nonzero_coefs;
  std::vector<std::pair<int, BlockId>> recoveries;  // (cycle, block)
  // Largest rise of the training objective over a single block update, or 0.
  double worst_block_increase = 0.0;
  int cycles = 0;
  bool converged = false;
};

struct DpamModel {
  bool logistic = false;
  int p = 0;
  double intercept = 0.0;  // mean response (linear) or fitted intercept (logistic)
  KnotGrid knots;
  FactorMeans factor_means;
  int m = 2;
  int K = 2;
  double rho = 0.0;
  double lam = 0.0;
  std::vector<BlockId> blocks;
  std::vector<Eigen::VectorXd> coefs;
  std::vector<Eigen::RowVectorXd> col_means;
  // Optional affine map applied to raw inputs before the basis: (x - center) / scale.
  Eigen::RowVectorXd input_center;
  Eigen::RowVectorXd input_scale;

  int nonzero_blocks() const;
  long nonzero_coefs() const;
};

struct FitResult {
  DpamModel model;
  TrainTrace trace;
  Eigen::VectorXd fitted;  // training predictor on the link scale
};

/// Share of one epoch spent by `scans` passes over `block`.
double epoch_cost(const DesignBlock& block, double scans, const std::vector<DesignBlock>& blocks);

enum class RecoveryOutcome { Kept, Reverted };

/// Restores `coef` from `saved` when the update raised the loss; ties keep.
RecoveryOutcome check_and_recovery(double pre_loss, double post_loss, Eigen::VectorXd& coef,
                                   const Eigen::VectorXd& saved);

FitResult fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TrainConfig& config,
                     const BasisParams& params, double rho, double lam);

FitResult fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const TrainConfig& config, const BasisParams& params, double rho,
                       double lam);

/// Additive predictor on the link scale.
Eigen::VectorXd predict_link(const DpamModel& model, const Eigen::MatrixXd& X_new);
/// Mean response: the predictor itself (linear) or its expit (logistic).
Eigen::VectorXd predict(const DpamModel& model, const Eigen::MatrixXd& X_new);

/// ||y - mean(y)||_n, the scale used for relative lambda.
double centered_norm_n(const Eigen::VectorXd& y);

}  // namespace dpam

#endif  // DPAM_BACKFIT_HPP
