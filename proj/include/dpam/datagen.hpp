#ifndef DPAM_DATAGEN_HPP
#define DPAM_DATAGEN_HPP

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

namespace dpam {

enum class Family { LinearG, LogisticG, PhaseShift };

Family parse_family(const std::string& name);
std::string family_name(Family f);

struct SyntheticSpec {
  long n = 1000;
  int p = 10;
  // Unset: 0.5138 for LinearG, sd(signal)/3 for PhaseShift; unused for LogisticG.
  std::optional<double> noise_sd;
  std::uint64_t seed = 1;
  Family family = Family::LinearG;

  void validate() const;
};

struct SyntheticData {
  Eigen::MatrixXd X;      // covariates in [0, 1]
  Eigen::MatrixXd X_raw;  // phase shift only: inputs on their physical ranges
  Eigen::VectorXd y;
  Eigen::VectorXd signal;  // f(X) or the noiseless phase
  double noise_sd = 0.0;
};

/// g_1..g_7 on [0, 1].
double g_function(int i, double x);
/// Integral of g_i over [0, 1].
double g_mean(int i);
inline double g_centered(int i, double x) { return g_function(i, x) - g_mean(i); }

/// Mean function of the synthetic regression; uses x_1..x_7 of the row.
double regression_signal(const Eigen::Ref<const Eigen::RowVectorXd>& x);

/// arctan((omega L - 1/(omega C)) / R), continuous at R = 0.
double phase_shift(double R, double omega, double L, double C);

SyntheticData gen_regression(const SyntheticSpec& spec);
SyntheticData gen_logistic(const SyntheticSpec& spec);
SyntheticData gen_phase_shift(const SyntheticSpec& spec);
SyntheticData generate(const SyntheticSpec& spec);

}  // namespace dpam

#endif  // DPAM_DATAGEN_HPP
