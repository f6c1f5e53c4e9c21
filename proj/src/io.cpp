#include "prcd/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "prcd/datagen.hpp"

namespace prcd {

using nlohmann::json;

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ParseError("cannot open for writing: " + path);
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open for reading: " + path);
  return f;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r > 0 ? static_cast<int>(rows[0].size()) : 0;
  Matrix m(r, c);
  for (int i = 0; i < r; ++i) {
    if (static_cast<int>(rows[static_cast<size_t>(i)].size()) != c)
      throw ParseError("ragged matrix in JSON");
    for (int j = 0; j < c; ++j) m(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
  }
  return m;
}

double parse_number(const std::string& tok, const std::string& path) {
  try {
    size_t pos = 0;
    double v = std::stod(tok, &pos);
    while (pos < tok.size() && std::isspace(static_cast<unsigned char>(tok[pos]))) ++pos;
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError("non-numeric value '" + tok + "' in " + path);
  }
}

}  // namespace

void save_timeseries_csv(const TimeSeriesData& data, const std::string& path) {
  auto f = open_out(path);
  for (int j = 0; j < data.dim(); ++j) f << (j ? "," : "") << "v" << j;
  f << "\n";
  for (int t = 0; t < data.rows(); ++t) {
    for (int j = 0; j < data.dim(); ++j)
      f << (j ? "," : "") << format_g17(data.observations(t, j));
    f << "\n";
  }
}

TimeSeriesData load_timeseries_csv(const std::string& path, int lag_order) {
  auto f = open_in(path);
  std::string line;
  if (!std::getline(f, line)) throw ParseError("empty dataset file: " + path);
  std::vector<std::vector<double>> rows;
  size_t width = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) row.push_back(parse_number(tok, path));
    if (width == 0) width = row.size();
    if (row.size() != width) throw ParseError("ragged CSV row in " + path);
    rows.push_back(std::move(row));
  }
  TimeSeriesData data;
  data.lag_order = lag_order;
  data.observations.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < width; ++j)
      data.observations(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return data;
}

void save_truth_json(const GroundTruth& truth, const std::string& path) {
  json j;
  j["d"] = truth.dim();
  j["K"] = static_cast<int>(truth.adjacency_per_lag.size()) - 1;
  json lags = json::array();
  for (const IntMatrix& a : truth.adjacency_per_lag) {
    json rows = json::array();
    for (int i = 0; i < a.rows(); ++i) {
      json row = json::array();
      for (int c = 0; c < a.cols(); ++c) row.push_back(a(i, c));
      rows.push_back(std::move(row));
    }
    lags.push_back(std::move(rows));
  }
  j["adjacency_per_lag"] = std::move(lags);
  json ws = json::array();
  for (const Matrix& w : truth.weights.w) ws.push_back(matrix_to_json(w));
  j["weights"] = std::move(ws);
  open_out(path) << j.dump(1) << "\n";
}

GroundTruth load_truth_json(const std::string& path) {
  json j;
  try {
    open_in(path) >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad truth JSON: ") + e.what());
  }
  GroundTruth t;
  for (const auto& rows : j.at("adjacency_per_lag")) {
    Matrix m = matrix_from_json(rows);
    t.adjacency_per_lag.push_back(m.cast<int>());
  }
  for (const auto& rows : j.at("weights")) t.weights.w.push_back(matrix_from_json(rows));
  t.combined = combined_adjacency(t.adjacency_per_lag);
  return t;
}

void save_prior_csv(const PriorMatrix& prior, const std::string& path) {
  auto f = open_out(path);
  for (int i = 0; i < prior.dim(); ++i) {
    for (int j = 0; j < prior.dim(); ++j)
      f << (j ? "," : "") << format_g17(prior.values(i, j));
    f << "\n";
  }
}

void save_prior_json(const PriorMatrix& prior, const std::string& path) {
  json j;
  const int d = prior.dim();
  j["d"] = d;
  json vals = json::array();
  for (int i = 0; i < d; ++i)
    for (int c = 0; c < d; ++c) vals.push_back(prior.values(i, c));
  j["values"] = std::move(vals);
  open_out(path) << j.dump(1) << "\n";
}

PriorMatrix load_prior(const std::string& path, int expected_d) {
  Matrix values;
  if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
    json j;
    try {
      open_in(path) >> j;
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad prior JSON: ") + e.what());
    }
    int d = j.at("d");
    const auto& vals = j.at("values");
    if (static_cast<int>(vals.size()) != d * d)
      throw DimensionError("prior JSON values length != d*d");
    values.resize(d, d);
    for (int i = 0; i < d; ++i)
      for (int c = 0; c < d; ++c)
        values(i, c) = vals[static_cast<size_t>(i * d + c)];
  } else {
    auto f = open_in(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      std::vector<double> row;
      std::stringstream ss(line);
      std::string tok;
      while (std::getline(ss, tok, ',')) row.push_back(parse_number(tok, path));
      rows.push_back(std::move(row));
    }
    const int d = static_cast<int>(rows.size());
    values.resize(d, d);
    for (int i = 0; i < d; ++i) {
      if (static_cast<int>(rows[static_cast<size_t>(i)].size()) != d)
        throw DimensionError("prior CSV is not square");
      for (int c = 0; c < d; ++c) values(i, c) = rows[static_cast<size_t>(i)][static_cast<size_t>(c)];
    }
  }
  if (expected_d >= 0 && values.rows() != expected_d)
    throw DimensionError("prior dimension does not match dataset");
  PriorMatrix p;
  p.values = values.cwiseMax(0.0).cwiseMin(1.0);
  p.values.diagonal().setZero();
  p.provenance = path;
  return p;
}

void save_fit_result_json(const FitResult& result, const std::string& path) {
  json j;
  const int d = result.weights.dim();
  j["d"] = d;
  j["K"] = result.weights.lag_order();
  auto stack_rowmajor = [&](const WeightStack& s) {
    json arr = json::array();
    for (const Matrix& w : s.w) {
      json flat = json::array();
      for (int i = 0; i < w.rows(); ++i)
        for (int c = 0; c < w.cols(); ++c) flat.push_back(w(i, c));
      arr.push_back(std::move(flat));
    }
    return arr;
  };
  j["weights"] = stack_rowmajor(result.weights);
  j["weights_raw"] = stack_rowmajor(result.weights_raw);
  j["tau_realized"] = matrix_to_json(result.tau_realized);
  j["outer_iterations"] = result.outer_iterations;
  j["final_h"] = result.final_h;
  json traj = json::array();
  for (const OuterRecord& r : result.trajectory)
    traj.push_back({{"h", r.h},
                    {"loss", r.loss},
                    {"mean_tau", r.mean_tau},
                    {"lambda1_eff", r.lambda1_eff},
                    {"rho", r.rho}});
  j["trajectory"] = std::move(traj);
  switch (result.trust.variant) {
    case TrustParams::Variant::Grouped: {
      j["trust"]["variant"] = "grouped";
      json tv = json::array();
      for (Eigen::Index g = 0; g < result.trust.tau.size(); ++g) tv.push_back(result.trust.tau(g));
      j["trust"]["tau"] = std::move(tv);
      break;
    }
    case TrustParams::Variant::TrustMlp:
      j["trust"]["variant"] = "trust_mlp";
      j["trust"]["bias_b"] = result.trust.bias_b;
      j["trust"]["w1"] = matrix_to_json(result.trust.mlp.w1);
      j["trust"]["b1"] = matrix_to_json(result.trust.mlp.b1);
      j["trust"]["w2"] = matrix_to_json(result.trust.mlp.w2);
      j["trust"]["b2"] = result.trust.mlp.b2;
      break;
    case TrustParams::Variant::Fixed:
      j["trust"]["variant"] = "fixed";
      j["trust"]["tau_const"] = result.trust.tau_const;
      break;
  }
  open_out(path) << j.dump(1) << "\n";
}

}  // namespace prcd
