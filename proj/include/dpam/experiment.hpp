#ifndef DPAM_EXPERIMENT_HPP
#define DPAM_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpam/backfit.hpp"
#include "dpam/basis.hpp"
#include "dpam/datagen.hpp"

namespace dpam {

/// A penalty level: absolute, or ||Y - mean(Y)||_n / divisor resolved after loading data.
struct LamSpec {
  bool relative = false;
  double value = 0.0;  // absolute lambda, or the divisor when relative
  std::string text;    // as written, for reports

  double resolve(double norm_y) const { return relative ? norm_y / value : value; }
};

/// Reals as decimal literals or powers "b^e" (e.g. 2^-19).
double parse_real(const std::string& text);
/// "0.01", "2^-8" or "norm_y / 2^8".
LamSpec parse_lam(const std::string& text);

struct ExperimentConfig {
  // Dataset: generated when csv_path is empty.
  SyntheticSpec data;
  long n_valid = 0;  // 0: same size as the training set
  std::filesystem::path csv_path;
  std::filesystem::path valid_csv_path;
  std::string response = "y";
  bool standardize = false;
  std::optional<double> split;  // training fraction for a random split
  std::uint64_t split_seed = 1;

  std::string model = "auto";  // linear, logistic, or auto (logistic for the logistic family)
  BasisParams basis{6, 2, 2};
  std::vector<double> rho;
  std::vector<LamSpec> lam;
  TrainConfig train;  // sizes come from tau/alpha below
  std::optional<double> tau, alpha;
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path out_dir = "dpam_out";
  int threads = 0;  // 0: hardware concurrency

  bool is_logistic() const;
  /// `train` with step sizes filled from tau/alpha (alpha defaults to 1).
  TrainConfig train_config() const;
  void validate() const;
};

/// Flat "key = value" text; '#' starts a comment; lists are comma separated,
/// optionally in brackets; integer ranges as "a..b".
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
/// Applies one setting with the same keys and syntax as the config file.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

struct ValidationMetrics {
  std::optional<double> mse;
  std::optional<double> cross_entropy;
  std::optional<double> misclassification;
};

ValidationMetrics evaluate(const DpamModel& model, const Eigen::MatrixXd& X,
                           const Eigen::VectorXd& y);

struct Prepared {
  Eigen::MatrixXd X, X_valid;
  Eigen::VectorXd y, y_valid;
  Eigen::RowVectorXd input_center, input_scale;
};

/// Loads or generates the training and validation data.
Prepared prepare_data(const ExperimentConfig& cfg);

struct RunResult {
  std::size_t rho_index = 0, lam_index = 0;
  std::uint64_t seed = 0;
  double rho = 0.0, lam = 0.0;
  TrainTrace trace;
  int nonzero_blocks = 0;
  long nonzero_coefs = 0;
  ValidationMetrics metrics;
};

struct ExperimentResult {
  std::vector<RunResult> runs;  // grid order: rho, lam, seed
};

/// "rho<i>_lam<j>" under the output directory.
std::string grid_point_dir(std::size_t rho_index, std::size_t lam_index);

/// Fits every (rho, lam, seed) on a worker pool and writes
///   <out>/rho<i>_lam<j>/trace_seed<k>.csv  epoch,training_loss,nonzero_blocks,nonzero_coefs
///   <out>/rho<i>_lam<j>/summary.csv        epoch,runs,mean_loss,min_loss,max_loss
///   <out>/table.csv                        one row per grid point, seed means
/// A failed run is rethrown after all workers join, naming the grid point and seed.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace dpam

#endif  // DPAM_EXPERIMENT_HPP
