#include "ddopt/io.hpp"

#include <fstream>
#include <sstream>

#include "ddopt/error.hpp"

namespace ddopt::io {

nlohmann::json matrix_to_json(const CMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

CMatrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw UsageError("matrix: expected a non-empty array of rows");
  const auto n_rows = static_cast<Eigen::Index>(j.size());
  const auto n_cols = static_cast<Eigen::Index>(j.front().size());
  CMatrix m(n_rows, n_cols);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n_cols) {
      throw UsageError("matrix: rows must all have the same length");
    }
    for (Eigen::Index c = 0; c < n_cols; ++c) {
      const auto& e = row[static_cast<std::size_t>(c)];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
        throw UsageError("matrix: entries must be [re, im] pairs");
      }
      m(r, c) = Complex{e[0].get<double>(), e[1].get<double>()};
    }
  }
  return m;
}

nlohmann::json system_to_json(const SystemModel& sys, bool include_matrices) {
  nlohmann::json j{{"seed", sys.spec.seed}, {"n_spins", sys.spec.n_spins}, {"J", sys.spec.J}, {"beta", sys.spec.beta}};
  if (include_matrices) {
    j["err_shape"] = matrix_to_json(sys.err_shape);
    j["bath_shape"] = matrix_to_json(sys.bath_shape);
  }
  return j;
}

SystemModel system_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("system: expected a JSON object");
  BathSpec spec;
  try {
    spec.seed = j.value("seed", spec.seed);
    spec.n_spins = j.value("n_spins", spec.n_spins);
    spec.J = j.value("J", spec.J);
    spec.beta = j.value("beta", spec.beta);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("system: ") + e.what());
  }
  const bool has_err = j.contains("err_shape");
  if (has_err != j.contains("bath_shape")) throw UsageError("system: err_shape and bath_shape go together");
  if (!has_err) return make_system(spec);
  return from_shapes(spec, matrix_from_json(j.at("err_shape")), matrix_from_json(j.at("bath_shape")));
}

nlohmann::json report_to_json(const DistanceReport& r) {
  return nlohmann::json{{"D", r.D}, {"q", r.q}, {"tau_c", r.tau_c}};
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write " + path.string());
    out << text;
    if (!out) throw UsageError("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

nlohmann::json manifest_to_json(const RunManifest& m) {
  return nlohmann::json{{"command", m.command},   {"config", m.config},     {"version", m.version},
                        {"seed", m.seed},         {"outputs", m.outputs},   {"wall_clock_s", m.wall_clock_s}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.version = j.value("version", std::string(kVersion));
    m.seed = j.value("seed", std::uint64_t{0});
    m.outputs = j.value("outputs", std::vector<std::string>{});
    m.wall_clock_s = j.value("wall_clock_s", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("manifest: ") + e.what());
  }
  return m;
}

}  // namespace ddopt::io
