#include "dpam/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dpam/errors.hpp"
#include "dpam/rng.hpp"

namespace dpam {

namespace {

constexpr std::uint64_t kSplitStream = 0x5350;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string::npos ? std::string::npos
                                                                      : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

// Full-field numeric parse; false for empty, NaN or trailing junk.
bool parse_number(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(v);
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Dataset parse_csv(const std::string& text, const CsvOptions& opts) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) {
      header = split_fields(line);
      break;
    }
  }
  if (header.empty()) throw ParseError("empty CSV: no header row", lineno);
  const auto resp_it = std::find(header.begin(), header.end(), opts.response);
  if (resp_it == header.end() && opts.require_response)
    throw ParseError("response column '" + opts.response + "' not in header", lineno);
  const bool has_resp = resp_it != header.end();
  const auto resp = has_resp ? static_cast<std::size_t>(resp_it - header.begin()) : header.size();
  if (header.size() < (has_resp ? 2u : 1u))
    throw ParseError("CSV needs at least one covariate column", lineno);

  Dataset d;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != resp) d.covariate_names.push_back(header[c]);

  std::vector<double> values, ys;
  std::vector<double> row(header.size());
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    std::string problem;
    if (fields.size() != header.size()) {
      problem = "expected " + std::to_string(header.size()) + " fields, found " +
                std::to_string(fields.size());
    } else {
      for (std::size_t c = 0; c < fields.size() && problem.empty(); ++c)
        if (!parse_number(fields[c], row[c]))
          problem = "column '" + header[c] + "': " +
                    (fields[c].empty() ? std::string("missing value")
                                       : "not a finite number '" + fields[c] + "'");
    }
    if (!problem.empty()) {
      if (opts.strict) throw ParseError(problem, lineno);
      d.rejected_lines.push_back(lineno);
      continue;
    }
    for (std::size_t c = 0; c < row.size(); ++c)
      if (c != resp) values.push_back(row[c]);
    if (has_resp) ys.push_back(row[resp]);
    ++rows;
  }
  const auto n = static_cast<Eigen::Index>(rows);
  const auto p = static_cast<Eigen::Index>(d.covariate_names.size());
  d.X = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), n, p);
  d.y = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  return d;
}

Dataset read_csv(const std::filesystem::path& path, const CsvOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_csv(ss.str(), opts);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& X,
               const Eigen::VectorXd& y) {
  if (y.size() && y.size() != X.rows()) throw ContractViolation("write_csv: y length != rows");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  for (Eigen::Index j = 0; j < X.cols(); ++j) out << (j ? "," : "") << 'x' << j + 1;
  if (y.size()) out << (X.cols() ? "," : "") << 'y';
  out << '\n';
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) out << (j ? "," : "") << format_double(X(i, j));
    if (y.size()) out << (X.cols() ? "," : "") << format_double(y[i]);
    out << '\n';
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

Standardization standardize(Eigen::MatrixXd& X) {
  if (X.rows() < 2) throw ContractViolation("standardize: need at least 2 rows");
  Standardization s;
  s.center = X.colwise().mean();
  s.scale.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double ss = (X.col(j).array() - s.center[j]).square().sum();
    s.scale[j] = std::sqrt(ss / static_cast<double>(X.rows() - 1));
    if (!(s.scale[j] > 0.0))
      throw DegenerateCovariate("standardize: column " + std::to_string(j + 1) + " is constant");
  }
  X.rowwise() -= s.center;
  X.array().rowwise() /= s.scale.array();
  return s;
}

SplitIndices split_indices(Eigen::Index n, double train_fraction, std::uint64_t seed) {
  if (n < 0) throw ContractViolation("split_indices: negative size");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0))
    throw ContractViolation("split_indices: train fraction must be in (0, 1]");
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  CounterRng rng(stream_key(seed, kSplitStream));
  for (std::size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[rng.index(i)]);
  const auto ntrain = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  SplitIndices out;
  out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(ntrain));
  out.valid.assign(perm.begin() + static_cast<std::ptrdiff_t>(ntrain), perm.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.valid.begin(), out.valid.end());
  return out;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(idx[i]);
  return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[idx[i]];
  return out;
}

}  // namespace dpam
