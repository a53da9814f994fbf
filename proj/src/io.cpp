#include "redmoment/io.hpp"

#include "redmoment/hashing.hpp"

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace redmoment::io {

namespace {

using nlohmann::json;
using states::RejectReason;
using states::StateError;

[[noreturn]] void reject(RejectReason reason, const std::string& message) {
  throw StateError(reason, std::string(states::reject_code(reason)) + ": " +
                               message);
}

Eigen::MatrixXd real_matrix_from_json(const json& j, int dim,
                                      const char* name) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim) {
    reject(RejectReason::ShapeMismatch,
           std::string(name) + " must be a " + std::to_string(dim) + "x" +
               std::to_string(dim) + " array");
  }
  Eigen::MatrixXd m(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<int>(row.size()) != dim) {
      reject(RejectReason::ShapeMismatch,
             std::string(name) + " row " + std::to_string(i) +
                 " has wrong length");
    }
    for (int k = 0; k < dim; ++k) {
      const json& cell = row[static_cast<std::size_t>(k)];
      if (!cell.is_number()) {
        reject(RejectReason::ParseError,
               std::string(name) + " entry (" + std::to_string(i) + "," +
                   std::to_string(k) + ") is not a number");
      }
      m(i, k) = cell.get<double>();
    }
  }
  return m;
}

}  // namespace

states::DensityMatrix parse_state_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    reject(RejectReason::ParseError, e.what());
  }
  if (!j.is_object()) {
    reject(RejectReason::ParseError, "top-level value must be an object");
  }
  if (!j.contains("d_a") || !j.contains("d_b") || !j.contains("re")) {
    reject(RejectReason::ParseError, "required keys: d_a, d_b, re");
  }
  if (!j["d_a"].is_number_integer() || !j["d_b"].is_number_integer()) {
    reject(RejectReason::ParseError, "d_a and d_b must be integers");
  }
  const int d_a = j["d_a"].get<int>();
  const int d_b = j["d_b"].get<int>();
  if (d_a < 2 || d_b < 2) {
    reject(RejectReason::BadDimension, "local dimensions must be >= 2");
  }
  const int dim = d_a * d_b;
  const Eigen::MatrixXd re = real_matrix_from_json(j["re"], dim, "re");
  Eigen::MatrixXd im = Eigen::MatrixXd::Zero(dim, dim);
  if (j.contains("im")) {
    im = real_matrix_from_json(j["im"], dim, "im");
  }
  states::CMatrix m(dim, dim);
  m.real() = re;
  m.imag() = im;
  return states::make_density(d_a, d_b, m);
}

states::DensityMatrix load_state_json(const std::string& path) {
  return parse_state_json(read_text_file(path));
}

void save_state_json(const states::DensityMatrix& rho, const std::string& path) {
  json re = json::array(), im = json::array();
  for (int i = 0; i < rho.dim(); ++i) {
    json rrow = json::array(), irow = json::array();
    for (int k = 0; k < rho.dim(); ++k) {
      rrow.push_back(rho.m(i, k).real());
      irow.push_back(rho.m(i, k).imag());
    }
    re.push_back(rrow);
    im.push_back(irow);
  }
  json j;
  j["d_a"] = rho.d_a;
  j["d_b"] = rho.d_b;
  j["re"] = re;
  j["im"] = im;
  write_text_file(path, j.dump(2) + "\n");
}

std::uint64_t manifest_hash(const RunManifest& manifest) {
  std::ostringstream os;
  os << manifest.command << '\n'
     << manifest.config.dump() << '\n'
     << manifest.master_seed << '\n'
     << manifest.version << '\n';
  for (const auto& out : manifest.outputs) os << out << '\n';
  return hashing::fnv1a64(os.str());
}

std::string manifest_hash_hex(const RunManifest& manifest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(manifest_hash(manifest)));
  return buf;
}

nlohmann::json manifest_json(const RunManifest& manifest) {
  json j;
  j["command"] = manifest.command;
  j["config"] = manifest.config;
  j["master_seed"] = manifest.master_seed;
  j["version"] = manifest.version;
  j["outputs"] = manifest.outputs;
  j["created_at"] = manifest.created_at;
  j["manifest_hash"] = manifest_hash_hex(manifest);
  return j;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  write_text_file(path, manifest_json(manifest).dump(2) + "\n");
}

void write_setting_records(const protocol::ProtocolResult& result,
                           const std::string& path,
                           const std::string& manifest_hash_hex) {
  std::ostringstream os;
  os << R"({"manifest_hash":")" << manifest_hash_hex << "\"}\n";
  for (std::size_t k = 0; k < result.per_setting.size(); ++k) {
    json j;
    j["setting_index"] = k;
    j["setting_seed"] = result.setting_seeds[k];
    json y = json::array();
    for (int i = 0; i < 10; ++i) y.push_back(result.per_setting[k][i]);
    j["y_hat"] = y;
    os << j.dump() << '\n';
  }
  write_text_file(path, os.str());
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string now_rfc3339() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) {
    std::filesystem::create_directories(target.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw states::StateError(states::RejectReason::ParseError,
                             std::string(states::reject_code(
                                 states::RejectReason::ParseError)) +
                                 ": cannot open file: " + path);
  }
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace redmoment::io
