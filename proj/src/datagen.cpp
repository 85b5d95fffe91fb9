#include "dpam/datagen.hpp"

#include <cmath>
#include <numbers>

#include "dpam/errors.hpp"
#include "dpam/rng.hpp"

namespace dpam {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRegressionNoiseSd = 0.5138;
constexpr std::uint64_t kCovariateStream = 0x58;
constexpr std::uint64_t kResponseStream = 0x59;

// Each row draws from its own counter stream, so rows can be generated in
// any order with identical results.
CounterRng row_rng(std::uint64_t seed, std::uint64_t stream, long row) {
  return CounterRng(stream_key(stream_key(seed, stream), static_cast<std::uint64_t>(row)));
}

Eigen::MatrixXd uniform_design(const SyntheticSpec& spec) {
  Eigen::MatrixXd X(spec.n, spec.p);
  for (long i = 0; i < spec.n; ++i) {
    CounterRng rng = row_rng(spec.seed, kCovariateStream, i);
    for (int j = 0; j < spec.p; ++j) X(i, j) = rng.uniform();
  }
  return X;
}

double sample_sd(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1));
}

}  // namespace

Family parse_family(const std::string& name) {
  if (name == "linear") return Family::LinearG;
  if (name == "logistic") return Family::LogisticG;
  if (name == "phase") return Family::PhaseShift;
  throw ConfigError("unknown family '" + name + "' (expected linear, logistic or phase)");
}

std::string family_name(Family f) {
  switch (f) {
    case Family::LinearG: return "linear";
    case Family::LogisticG: return "logistic";
    case Family::PhaseShift: return "phase";
  }
  return "?";
}

void SyntheticSpec::validate() const {
  if (n < 1) throw ContractViolation("SyntheticSpec: n must be >= 1");
  if (family == Family::PhaseShift) {
    if (p != 4) throw ContractViolation("SyntheticSpec: phase-shift data has p = 4");
  } else if (p != 7 && p != 10) {
    throw ContractViolation("SyntheticSpec: p must be 7 or 10");
  }
  if (noise_sd && !(*noise_sd >= 0.0))
    throw ContractViolation("SyntheticSpec: noise_sd must be >= 0");
}

double g_function(int i, double x) {
  const double s = std::sin(2 * kPi * x), c = std::cos(2 * kPi * x);
  switch (i) {
    case 1: return x;
    case 2: return (2 * x - 1) * (2 * x - 1);
    case 3: return 1.0 / (1.0 + x);
    case 4: return 0.1 * s + 0.2 * c + 0.3 * s * s + 0.4 * c * c * c + 0.5 * s * s * s;
    case 5: return s / (2.0 - s);
    case 6: return std::sin(4 * kPi * x) / (2.0 + s);
    case 7: return std::cos(4 * kPi * x) / (2.0 + c);
    default: throw ContractViolation("g_function: index must be in 1..7");
  }
}

double g_mean(int i) {
  static const double sqrt3 = std::sqrt(3.0);
  switch (i) {
    case 1: return 0.5;
    case 2: return 1.0 / 3.0;
    case 3: return std::numbers::ln2;
    case 4: return 0.15;  // only the 0.3 sin^2 term survives
    case 5: return 2.0 / sqrt3 - 1.0;
    case 6: return 0.0;
    case 7: return 7.0 / sqrt3 - 4.0;
    default: throw ContractViolation("g_mean: index must be in 1..7");
  }
}

double regression_signal(const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  if (x.size() < 7) throw ContractViolation("regression_signal: need at least 7 covariates");
  double f = 0.0;
  for (int i = 1; i <= 7; ++i) f += g_centered(i, x[i - 1]);
  f += g_centered(1, x[2] * x[3]);
  f += g_centered(2, (x[0] + x[2]) / 2);
  f += g_centered(3, x[0] * x[1]);
  f += g_centered(4, x[3] * x[4]);
  f += g_centered(5, (x[3] + x[5]) / 2);
  f += g_centered(6, (x[4] + x[1]) / 2);
  f += g_centered(7, x[5] * x[6]);
  return f;
}

double phase_shift(double R, double omega, double L, double C) {
  return std::atan2(omega * L - 1.0 / (omega * C), R);
}

SyntheticData gen_regression(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticData out;
  out.X = uniform_design(spec);
  out.noise_sd = spec.noise_sd.value_or(kRegressionNoiseSd);
  out.signal.resize(spec.n);
  out.y.resize(spec.n);
  for (long i = 0; i < spec.n; ++i) {
    out.signal[i] = regression_signal(out.X.row(i));
    CounterRng rng = row_rng(spec.seed, kResponseStream, i);
    out.y[i] = out.signal[i] + (out.noise_sd > 0.0 ? out.noise_sd * rng.normal() : 0.0);
  }
  return out;
}

SyntheticData gen_logistic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticData out;
  out.X = uniform_design(spec);
  out.signal.resize(spec.n);
  out.y.resize(spec.n);
  for (long i = 0; i < spec.n; ++i) {
    out.signal[i] = regression_signal(out.X.row(i));
    const double prob = 1.0 / (1.0 + std::exp(-out.signal[i]));
    CounterRng rng = row_rng(spec.seed, kResponseStream, i);
    out.y[i] = rng.uniform() < prob ? 1.0 : 0.0;
  }
  return out;
}

SyntheticData gen_phase_shift(const SyntheticSpec& spec) {
  spec.validate();
  static const double lo[4] = {0.0, 40 * kPi, 0.0, 1.0};
  static const double hi[4] = {100.0, 560 * kPi, 1.0, 11.0};
  SyntheticData out;
  out.X = uniform_design(spec);
  out.X_raw.resize(spec.n, 4);
  out.signal.resize(spec.n);
  for (long i = 0; i < spec.n; ++i) {
    for (int j = 0; j < 4; ++j) out.X_raw(i, j) = lo[j] + (hi[j] - lo[j]) * out.X(i, j);
    out.signal[i] = phase_shift(out.X_raw(i, 0), out.X_raw(i, 1), out.X_raw(i, 2), out.X_raw(i, 3));
  }
  out.noise_sd = spec.noise_sd.value_or(sample_sd(out.signal) / 3.0);
  out.y.resize(spec.n);
  for (long i = 0; i < spec.n; ++i) {
    CounterRng rng = row_rng(spec.seed, kResponseStream, i);
    out.y[i] = out.signal[i] + (out.noise_sd > 0.0 ? out.noise_sd * rng.normal() : 0.0);
  }
  return out;
}

SyntheticData generate(const SyntheticSpec& spec) {
  switch (spec.family) {
    case Family::LinearG: return gen_regression(spec);
    case Family::LogisticG: return gen_logistic(spec);
    case Family::PhaseShift: return gen_phase_shift(spec);
  }
  throw ContractViolation("generate: unknown family");
}

}  // namespace dpam
