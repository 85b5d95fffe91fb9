#include "dpam/model_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dpam/errors.hpp"

namespace dpam {

namespace {

using nlohmann::json;

template <class Vec>
json vec_to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

template <class Vec>
Vec json_to_vec(const json& a, const char* what) {
  if (!a.is_array()) throw ConfigError(std::string("model: '") + what + "' must be an array");
  Vec v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw ConfigError(std::string("model: non-numeric entry in '") + what + "'");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(std::string("model: missing key '") + key + "'");
  return *it;
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
}

}  // namespace

std::string serialize_model(const DpamModel& model) {
  json j;
  j["format"] = "dpam-model";
  j["format_version"] = kModelFormatVersion;
  j["link"] = model.logistic ? "logistic" : "identity";
  j["covariates"] = model.p;
  j["m"] = model.m;
  j["K"] = model.K;
  j["rho"] = model.rho;
  j["lam"] = model.lam;
  j["intercept"] = model.intercept;
  j["knots"] = model.knots;
  json fm = json::array();
  for (const auto& v : model.factor_means) fm.push_back(vec_to_json(v));
  j["factor_means"] = fm;
  if (model.input_center.size()) j["input_center"] = vec_to_json(model.input_center);
  if (model.input_scale.size()) j["input_scale"] = vec_to_json(model.input_scale);
  json blocks = json::array();
  for (std::size_t k = 0; k < model.blocks.size(); ++k) {
    json b;
    b["block"] = model.blocks[k];
    b["label"] = block_label(model.blocks[k]);
    b["col_means"] = vec_to_json(model.col_means[k]);
    b["coefs"] = vec_to_json(model.coefs[k]);
    blocks.push_back(std::move(b));
  }
  j["blocks"] = std::move(blocks);
  return j.dump(1) + "\n";
}

DpamModel deserialize_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model: ") + e.what(), line_of(text, e.byte));
  }
  if (!j.is_object() || j.value("format", std::string()) != "dpam-model")
    throw ConfigError("model: not a dpam model document");
  const int version = field(j, "format_version").get<int>();
  if (version != kModelFormatVersion)
    throw ConfigError("model: unsupported format version " + std::to_string(version));

  DpamModel m;
  try {
    const std::string link = field(j, "link").get<std::string>();
    if (link != "identity" && link != "logistic") throw ConfigError("model: unknown link '" + link + "'");
    m.logistic = link == "logistic";
    m.p = field(j, "covariates").get<int>();
    m.m = field(j, "m").get<int>();
    m.K = field(j, "K").get<int>();
    m.rho = field(j, "rho").get<double>();
    m.lam = field(j, "lam").get<double>();
    m.intercept = field(j, "intercept").get<double>();
    m.knots = field(j, "knots").get<KnotGrid>();
    for (const auto& v : field(j, "factor_means"))
      m.factor_means.push_back(json_to_vec<Eigen::RowVectorXd>(v, "factor_means"));
    if (j.contains("input_center"))
      m.input_center = json_to_vec<Eigen::RowVectorXd>(j["input_center"], "input_center");
    if (j.contains("input_scale"))
      m.input_scale = json_to_vec<Eigen::RowVectorXd>(j["input_scale"], "input_scale");
    for (const auto& b : field(j, "blocks")) {
      m.blocks.push_back(field(b, "block").get<BlockId>());
      m.col_means.push_back(json_to_vec<Eigen::RowVectorXd>(field(b, "col_means"), "col_means"));
      m.coefs.push_back(json_to_vec<Eigen::VectorXd>(field(b, "coefs"), "coefs"));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }

  if (m.p < 1 || static_cast<int>(m.knots.size()) != m.p ||
      static_cast<int>(m.factor_means.size()) != m.p)
    throw ConfigError("model: knots and factor means must cover every covariate");
  for (std::size_t k = 0; k < m.blocks.size(); ++k) {
    Eigen::Index d = 1;
    for (int c : m.blocks[k]) {
      if (c < 0 || c >= m.p) throw ConfigError("model: block index out of range");
      d *= static_cast<Eigen::Index>(m.knots[c].size()) - 1;
    }
    if (m.coefs[k].size() != d || m.col_means[k].size() != d)
      throw ConfigError("model: block " + block_label(m.blocks[k]) + " has the wrong width");
  }
  return m;
}

void save_model(const DpamModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << serialize_model(model);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

DpamModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace dpam
