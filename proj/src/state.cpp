#include "redmoment/state.hpp"

#include "redmoment/haar.hpp"

#include <cmath>
#include <sstream>

namespace redmoment::states {

const char* reject_code(RejectReason reason) {
  switch (reason) {
    case RejectReason::BadDimension: return "bad_dimension";
    case RejectReason::ShapeMismatch: return "shape_mismatch";
    case RejectReason::NonHermitian: return "non_hermitian";
    case RejectReason::TraceNotOne: return "trace_not_one";
    case RejectReason::NotPositive: return "not_positive";
    case RejectReason::ParseError: return "parse_error";
  }
  return "unknown";
}

namespace {

[[noreturn]] void reject(RejectReason reason, const std::string& message) {
  throw StateError(reason, std::string(reject_code(reason)) + ": " + message);
}

void validate_hermitian_trace(const CMatrix& m) {
  const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (herm > kHermitianTol) {
    reject(RejectReason::NonHermitian,
           "max |m - m^dagger| = " + std::to_string(herm));
  }
  const double tr_err = std::abs(m.trace() - Complex(1.0, 0.0));
  if (tr_err > kTraceTol) {
    reject(RejectReason::TraceNotOne, "|Tr - 1| = " + std::to_string(tr_err));
  }
}

void validate_psd(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin < -kPsdTol) {
    reject(RejectReason::NotPositive,
           "lambda_min = " + std::to_string(lmin));
  }
}

}  // namespace

DensityMatrix make_density(int d_a, int d_b, CMatrix m, bool check_psd) {
  if (d_a < 1 || d_b < 1) {
    reject(RejectReason::BadDimension,
           "subsystem dimensions must be positive, got (" +
               std::to_string(d_a) + "," + std::to_string(d_b) + ")");
  }
  const int dim = d_a * d_b;
  if (m.rows() != dim || m.cols() != dim) {
    reject(RejectReason::ShapeMismatch,
           "expected " + std::to_string(dim) + "x" + std::to_string(dim) +
               ", got " + std::to_string(m.rows()) + "x" +
               std::to_string(m.cols()));
  }
  validate_hermitian_trace(m);
  if (check_psd) validate_psd(m);
  return DensityMatrix{d_a, d_b, std::move(m)};
}

LocalState make_local(CMatrix m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    reject(RejectReason::ShapeMismatch, "local state must be square");
  }
  validate_hermitian_trace(m);
  validate_psd(m);
  return LocalState{static_cast<int>(m.rows()), std::move(m)};
}

namespace {

Eigen::VectorXcd max_entangled_vector(int d) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(d * d);
  const double amp = 1.0 / std::sqrt(static_cast<double>(d));
  for (int j = 0; j < d; ++j) v[flat_index(j, j, d)] = amp;
  return v;
}

void require_range(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

}  // namespace

DensityMatrix make_state(const FamilyParams& params) {
  switch (params.family) {
    case Family::MaxEntangled: {
      require_range(params.d >= 2, "mes: d must be >= 2");
      const Eigen::VectorXcd v = max_entangled_vector(params.d);
      return DensityMatrix{params.d, params.d, v * v.adjoint()};
    }
    case Family::Isotropic: {
      require_range(params.d >= 2, "iso: d must be >= 2");
      require_range(params.p >= 0.0 && params.p <= 1.0,
                    "iso: p must lie in [0,1]");
      const int d = params.d;
      const Eigen::VectorXcd v = max_entangled_vector(d);
      CMatrix m = params.p * (v * v.adjoint()).eval();
      m += ((1.0 - params.p) / (d * d)) * CMatrix::Identity(d * d, d * d);
      return DensityMatrix{d, d, std::move(m)};
    }
    case Family::BiasedTwoQubit: {
      require_range(params.p >= 0.0 && params.p <= 1.0,
                    "biased: p must lie in [0,1]");
      require_range(params.x >= 0.0 && params.x <= 1.0,
                    "biased: x must lie in [0,1]");
      Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(4);
      psi[flat_index(0, 1, 2)] = std::sqrt(params.x);
      psi[flat_index(1, 0, 2)] = std::sqrt(1.0 - params.x);
      CMatrix m = params.p * (psi * psi.adjoint()).eval();
      m(0, 0) += 1.0 - params.p;
      return DensityMatrix{2, 2, std::move(m)};
    }
    case Family::MaximallyMixed: {
      require_range(params.d_a >= 2 && params.d_b >= 2,
                    "mixed: dimensions must be >= 2");
      const int dim = params.d_a * params.d_b;
      return DensityMatrix{params.d_a, params.d_b,
                           CMatrix::Identity(dim, dim) / dim};
    }
    case Family::ProductPure: {
      require_range(params.d_a >= 2 && params.d_b >= 2,
                    "product: dimensions must be >= 2");
      const CMatrix u_a =
          haar::sample_haar_unitary(params.d_a, rng::derive_seed(params.seed, 0));
      const CMatrix u_b =
          haar::sample_haar_unitary(params.d_b, rng::derive_seed(params.seed, 1));
      Eigen::VectorXcd v(params.d_a * params.d_b);
      for (int i = 0; i < params.d_a; ++i)
        for (int j = 0; j < params.d_b; ++j)
          v[flat_index(i, j, params.d_b)] = u_a(i, 0) * u_b(j, 0);
      return DensityMatrix{params.d_a, params.d_b, v * v.adjoint()};
    }
    case Family::Custom:
      throw std::invalid_argument("custom states are loaded from files");
  }
  throw std::invalid_argument("unknown family tag");
}

LocalState partial_trace(const DensityMatrix& rho, Subsystem over) {
  const int d_a = rho.d_a, d_b = rho.d_b;
  if (over == Subsystem::B) {
    CMatrix out = CMatrix::Zero(d_a, d_a);
    for (int i = 0; i < d_a; ++i)
      for (int j = 0; j < d_a; ++j)
        for (int k = 0; k < d_b; ++k)
          out(i, j) += rho.m(flat_index(i, k, d_b), flat_index(j, k, d_b));
    return LocalState{d_a, std::move(out)};
  }
  CMatrix out = CMatrix::Zero(d_b, d_b);
  for (int i = 0; i < d_b; ++i)
    for (int j = 0; j < d_b; ++j)
      for (int k = 0; k < d_a; ++k)
        out(i, j) += rho.m(flat_index(k, i, d_b), flat_index(k, j, d_b));
  return LocalState{d_b, std::move(out)};
}

DensityMatrix partial_transpose(const DensityMatrix& rho) {
  const int d_a = rho.d_a, d_b = rho.d_b;
  CMatrix out(rho.dim(), rho.dim());
  for (int i = 0; i < d_a; ++i)
    for (int j = 0; j < d_a; ++j)
      for (int k = 0; k < d_b; ++k)
        for (int l = 0; l < d_b; ++l)
          out(flat_index(i, k, d_b), flat_index(j, l, d_b)) =
              rho.m(flat_index(j, k, d_b), flat_index(i, l, d_b));
  return DensityMatrix{d_a, d_b, std::move(out)};
}

DensityMatrix swap_subsystems(const DensityMatrix& rho) {
  const int d_a = rho.d_a, d_b = rho.d_b;
  CMatrix out(rho.dim(), rho.dim());
  for (int i = 0; i < d_a; ++i)
    for (int j = 0; j < d_a; ++j)
      for (int k = 0; k < d_b; ++k)
        for (int l = 0; l < d_b; ++l)
          out(flat_index(k, i, d_a), flat_index(l, j, d_a)) =
              rho.m(flat_index(i, k, d_b), flat_index(j, l, d_b));
  return DensityMatrix{d_b, d_a, std::move(out)};
}

Eigen::VectorXd spectrum(const CMatrix& h) {
  if (h.rows() != h.cols()) {
    reject(RejectReason::ShapeMismatch, "spectrum requires a square matrix");
  }
  const double herm = (h - h.adjoint()).cwiseAbs().maxCoeff();
  if (herm > 1e-8) {
    reject(RejectReason::NonHermitian,
           "spectrum input max |h - h^dagger| = " + std::to_string(herm));
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

namespace {

double parse_real(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || value.empty()) {
    reject(RejectReason::ParseError, "family key " + key +
                                         " expects a real number, got '" +
                                         value + "'");
  }
  return out;
}

int parse_int(const std::string& key, const std::string& value) {
  const double real = parse_real(key, value);
  const int out = static_cast<int>(real);
  if (static_cast<double>(out) != real) {
    reject(RejectReason::ParseError,
           "family key " + key + " expects an integer, got '" + value + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || value.empty()) {
    reject(RejectReason::ParseError, "family key " + key +
                                         " expects an unsigned integer, got '" +
                                         value + "'");
  }
  return out;
}

}  // namespace

FamilyParams parse_family(const std::string& spec) {
  const std::size_t colon = spec.find(':');
  const std::string name = spec.substr(0, colon);

  FamilyParams params;
  bool has_p = false, has_x = false;
  if (name == "mes") {
    params.family = Family::MaxEntangled;
  } else if (name == "iso") {
    params.family = Family::Isotropic;
    params.p = 1.0;
  } else if (name == "biased") {
    params.family = Family::BiasedTwoQubit;
    params.p = 1.0;
  } else if (name == "mixed") {
    params.family = Family::MaximallyMixed;
  } else if (name == "product") {
    params.family = Family::ProductPure;
  } else {
    reject(RejectReason::ParseError, "unknown family name '" + name + "'");
  }

  std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  std::istringstream stream(rest);
  std::string item;
  while (std::getline(stream, item, ',')) {
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) {
      reject(RejectReason::ParseError,
             "family option '" + item + "' is not key=value");
    }
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    if (key == "d") {
      params.d = parse_int(key, value);
      params.d_a = params.d_b = params.d;
    } else if (key == "da") {
      params.d_a = parse_int(key, value);
    } else if (key == "db") {
      params.d_b = parse_int(key, value);
    } else if (key == "p") {
      params.p = parse_real(key, value);
      has_p = true;
    } else if (key == "x") {
      params.x = parse_real(key, value);
      has_x = true;
    } else if (key == "seed") {
      params.seed = parse_u64(key, value);
    } else {
      reject(RejectReason::ParseError, "unknown family key '" + key + "'");
    }
  }

  if (params.family == Family::Isotropic && !has_p) {
    reject(RejectReason::ParseError, "iso requires p=<real>");
  }
  if (params.family == Family::BiasedTwoQubit && (!has_p || !has_x)) {
    reject(RejectReason::ParseError, "biased requires x=<real>,p=<real>");
  }
  return params;
}

std::string family_to_string(const FamilyParams& params) {
  std::ostringstream out;
  switch (params.family) {
    case Family::MaxEntangled:
      out << "mes:d=" << params.d;
      break;
    case Family::Isotropic:
      out << "iso:d=" << params.d << ",p=" << params.p;
      break;
    case Family::BiasedTwoQubit:
      out << "biased:x=" << params.x << ",p=" << params.p;
      break;
    case Family::MaximallyMixed:
      out << "mixed:da=" << params.d_a << ",db=" << params.d_b;
      break;
    case Family::ProductPure:
      out << "product:da=" << params.d_a << ",db=" << params.d_b
          << ",seed=" << params.seed;
      break;
    case Family::Custom:
      out << "custom";
      break;
  }
  return out.str();
}

}  // namespace redmoment::states
