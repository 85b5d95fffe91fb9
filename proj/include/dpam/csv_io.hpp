#ifndef DPAM_CSV_IO_HPP
#define DPAM_CSV_IO_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dpam {

/// Shortest decimal that reads back to the same double.
std::string format_double(double v);

struct CsvOptions {
  std::string response = "y";
  // When false, a header without the response column yields an empty y and
  // every column is a covariate.
  bool require_response = true;
  // Strict: a missing or non-numeric cell is a ParseError. Otherwise the row
  // is skipped and its line number recorded.
  bool strict = true;
};

struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> covariate_names;
  std::vector<std::size_t> rejected_lines;
};

/// Header row required; every column except the response is a covariate.
Dataset read_csv(const std::filesystem::path& path, const CsvOptions& opts = {});
Dataset parse_csv(const std::string& text, const CsvOptions& opts = {});

/// Header x1..xp then y (omitted when y is empty).
void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& X,
               const Eigen::VectorXd& y);

struct Standardization {
  Eigen::RowVectorXd center;
  Eigen::RowVectorXd scale;  // sample sd, n - 1 denominator
};

/// Standardizes X in place; a zero-variance column raises DegenerateCovariate.
Standardization standardize(Eigen::MatrixXd& X);

struct SplitIndices {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> valid;
};

/// Seeded random partition with round(n * train_fraction) training rows,
/// each part in ascending row order.
SplitIndices split_indices(Eigen::Index n, double train_fraction, std::uint64_t seed);

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& idx);
Eigen::VectorXd take_rows(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& idx);

}  // namespace dpam

#endif  // DPAM_CSV_IO_HPP
