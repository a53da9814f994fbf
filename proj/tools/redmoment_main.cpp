#include "redmoment/certification.hpp"
#include "redmoment/hashing.hpp"
#include "redmoment/inversion.hpp"
#include "redmoment/io.hpp"
#include "redmoment/moment_matrix.hpp"
#include "redmoment/protocol.hpp"
#include "redmoment/state.hpp"
#include "redmoment/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
namespace rm = redmoment;

// Exit codes: 0 success, 1 golden-check or internal failure, 2 input error.
struct GoldenFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GlobalOpts {
  bool json = false;
  std::uint64_t seed = 0;
  int threads = 0;
};

std::string fmt(double v) { return rm::io::format_double(v); }

const char* verdict_string(rm::moments::Verdict v) {
  return v == rm::moments::Verdict::EntanglementCertified
             ? "entanglement_certified"
             : "inconclusive";
}

// Integer range "lo..hi" or a single value.
std::vector<int> parse_int_range(const std::string& text) {
  const auto pos = text.find("..");
  auto to_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad integer range: " + text);
    }
    if (used != s.size()) throw std::invalid_argument("bad integer range: " + text);
    return v;
  };
  std::vector<int> out;
  if (pos == std::string::npos) {
    out.push_back(to_int(text));
    return out;
  }
  const int lo = to_int(text.substr(0, pos));
  const int hi = to_int(text.substr(pos + 2));
  if (lo > hi) throw std::invalid_argument("empty range: " + text);
  for (int d = lo; d <= hi; ++d) out.push_back(d);
  return out;
}

// Real range "lo..hi[:step]" (default step 0.1) or a single value.
std::vector<double> parse_real_range(const std::string& text) {
  auto to_real = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad real range: " + text);
    }
    if (used != s.size()) throw std::invalid_argument("bad real range: " + text);
    return v;
  };
  const auto pos = text.find("..");
  if (pos == std::string::npos) return {to_real(text)};
  const std::string tail = text.substr(pos + 2);
  const auto colon = tail.find(':');
  const double lo = to_real(text.substr(0, pos));
  const double hi = to_real(colon == std::string::npos ? tail : tail.substr(0, colon));
  const double step =
      colon == std::string::npos ? 0.1 : to_real(tail.substr(colon + 1));
  if (!(step > 0.0) || lo > hi) throw std::invalid_argument("empty range: " + text);
  const int count = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(lo + i * step);
  return out;
}

struct StateSource {
  rm::states::DensityMatrix rho;
  std::string label;  // family spec or file path, for reports
};

StateSource resolve_state(const std::string& family_spec,
                          const std::string& state_path) {
  if (family_spec.empty() == state_path.empty()) {
    throw std::invalid_argument(
        "exactly one of --family or --state is required");
  }
  if (!family_spec.empty()) {
    const rm::states::FamilyParams params = rm::states::parse_family(family_spec);
    return {rm::states::make_state(params), rm::states::family_to_string(params)};
  }
  return {rm::io::load_state_json(state_path), state_path};
}

json invariants_json(const rm::invariants::InvariantVector& inv) {
  json j;
  const char* names[9] = {"x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8", "xS"};
  for (int i = 0; i < 9; ++i) j[names[i]] = inv.x[i];
  if (inv.has_tr_rho3) j["tr_rho3"] = inv.tr_rho3;
  return j;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(row);
  }
  return rows;
}

void emit_csv(const std::string& out_path, const std::string& hash_hex,
              const std::string& header,
              const std::vector<std::string>& rows, bool to_stdout) {
  std::ostringstream os;
  os << "# manifest_hash=" << hash_hex << "\n" << header << "\n";
  for (const auto& row : rows) os << row << "\n";
  if (!out_path.empty()) {
    rm::io::write_text_file(out_path, os.str());
  }
  if (to_stdout) std::cout << os.str();
}

// ---------------------------------------------------------------------------
// witness

int cmd_witness(const GlobalOpts& g, const std::string& family_spec,
                const std::string& state_path) {
  const StateSource src = resolve_state(family_spec, state_path);
  const rm::states::DensityMatrix& rho = src.rho;
  const rm::invariants::InvariantVector inv = rm::invariants::compute_invariants(rho);
  const rm::moments::MomentMatrix mbar = rm::moments::build_mbar(inv, rho.d_b);
  const rm::moments::WitnessValue value = rm::moments::witness(rho);
  const double hom_min = rm::moments::min_eigenvalue(
      rm::moments::homogeneous_block(mbar).m);

  json report;
  report["command"] = "witness";
  report["state"] = {{"source", src.label}, {"d_a", rho.d_a}, {"d_b", rho.d_b}};
  report["invariants"] = invariants_json(inv);
  report["mbar"] = matrix_json(mbar.m);
  report["e4"] = value.e4;
  report["homogeneous_lambda_min"] = hom_min;
  report["verdict"] = verdict_string(value.verdict);
  if (rho.d_a == rho.d_b) {
    report["thresholds"] = {
        {"d", rho.d_a},
        {"third_order", rm::moments::isotropic_threshold_3rd(rho.d_a)},
        {"purity", rm::moments::purity_threshold(rho.d_a)},
        {"ppt", rm::moments::ppt_threshold(rho.d_a)}};
  }

  if (g.json) {
    std::cout << report.dump(2) << "\n";
    return 0;
  }
  std::cout << "state: " << src.label << " (d_a=" << rho.d_a
            << ", d_b=" << rho.d_b << ")\n";
  std::cout << "invariants:\n";
  const char* names[9] = {"x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8", "xS"};
  for (int i = 0; i < 9; ++i)
    std::cout << "  " << names[i] << " = " << fmt(inv.x[i]) << "\n";
  if (inv.has_tr_rho3)
    std::cout << "  tr_rho3 = " << fmt(inv.tr_rho3) << "\n";
  std::cout << "symmetrized moment matrix:\n";
  for (int i = 0; i < 4; ++i) {
    std::cout << " ";
    for (int k = 0; k < 4; ++k) std::cout << "  " << fmt(mbar.m(i, k));
    std::cout << "\n";
  }
  std::cout << "homogeneous_lambda_min = " << fmt(hom_min) << "\n";
  std::cout << "e4 = " << fmt(value.e4) << "\n";
  std::cout << "verdict = " << verdict_string(value.verdict) << "\n";
  if (rho.d_a == rho.d_b) {
    std::cout << "thresholds (isotropic, d=" << rho.d_a
              << "): third_order=" << fmt(rm::moments::isotropic_threshold_3rd(rho.d_a))
              << " purity=" << fmt(rm::moments::purity_threshold(rho.d_a))
              << " ppt=" << fmt(rm::moments::ppt_threshold(rho.d_a)) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// benchmark

int cmd_benchmark(const GlobalOpts& g, const std::string& suite,
                  const std::string& d_range, const std::string& x_range,
                  const std::string& out_path) {
  json config;
  config["suite"] = suite;
  json rows_json = json::array();
  std::vector<std::string> csv_rows;
  std::string header;
  bool golden_pass = true;
  std::string golden_message;

  if (suite == "mes") {
    const std::vector<int> ds = parse_int_range(d_range.empty() ? "2..8" : d_range);
    config["d"] = ds;
    header = "d,e4_closed,e4_numeric,abs_diff";
    for (const int d : ds) {
      if (d < 2) throw std::invalid_argument("mes needs d >= 2");
      const double closed = rm::moments::mes_lambda_min(d);
      rm::states::FamilyParams params;
      params.family = rm::states::Family::MaxEntangled;
      params.d = d;
      const double numeric = rm::moments::witness(rm::states::make_state(params)).e4;
      const double diff = std::abs(closed - numeric);
      if (diff > 1e-10) {
        golden_pass = false;
        golden_message = "mes d=" + std::to_string(d) +
                         ": |closed - numeric| = " + fmt(diff) + " > 1e-10";
      }
      csv_rows.push_back(std::to_string(d) + "," + fmt(closed) + "," +
                         fmt(numeric) + "," + fmt(diff));
      rows_json.push_back({{"d", d},
                           {"e4_closed", closed},
                           {"e4_numeric", numeric},
                           {"abs_diff", diff}});
    }
  } else if (suite == "isotropic") {
    const std::vector<int> ds = parse_int_range(d_range.empty() ? "2..6" : d_range);
    config["d"] = ds;
    header = "d,p_third_scan,p_third_closed,p_purity,p_ppt";
    for (const int d : ds) {
      if (d < 2) throw std::invalid_argument("isotropic needs d >= 2");
      rm::states::FamilyParams params;
      params.family = rm::states::Family::Isotropic;
      params.d = d;
      params.p = 0.0;
      const auto scan =
          rm::moments::threshold_scan(params, rm::moments::ScanVariant::Affine4);
      if (!scan.has_value()) {
        throw GoldenFailure("isotropic d=" + std::to_string(d) +
                            ": no threshold found by scan");
      }
      const double closed = rm::moments::isotropic_threshold_3rd(d);
      const double purity = rm::moments::purity_threshold(d);
      const double ppt = rm::moments::ppt_threshold(d);
      if (std::abs(*scan - closed) > 1e-6) {
        golden_pass = false;
        golden_message = "isotropic d=" + std::to_string(d) +
                         ": |scan - closed| = " + fmt(std::abs(*scan - closed)) +
                         " > 1e-6";
      }
      csv_rows.push_back(std::to_string(d) + "," + fmt(*scan) + "," +
                         fmt(closed) + "," + fmt(purity) + "," + fmt(ppt));
      rows_json.push_back({{"d", d},
                           {"p_third_scan", *scan},
                           {"p_third_closed", closed},
                           {"p_purity", purity},
                           {"p_ppt", ppt}});
    }
  } else if (suite == "biased") {
    const std::vector<double> xs =
        parse_real_range(x_range.empty() ? "0.1..0.9" : x_range);
    config["x"] = xs;
    header = "x,p_affine,p_homogeneous";
    for (const double x : xs) {
      if (!(x > 0.0) || !(x < 1.0)) {
        throw std::invalid_argument("biased needs x in (0, 1)");
      }
      rm::states::FamilyParams params;
      params.family = rm::states::Family::BiasedTwoQubit;
      params.x = x;
      const auto aff =
          rm::moments::threshold_scan(params, rm::moments::ScanVariant::Affine4);
      const auto hom = rm::moments::threshold_scan(
          params, rm::moments::ScanVariant::Homogeneous3);
      if (!aff.has_value()) {
        throw GoldenFailure("biased x=" + fmt(x) + ": no affine threshold");
      }
      if (std::abs(*aff - 0.5) > 1e-6) {
        golden_pass = false;
        golden_message = "biased x=" + fmt(x) +
                         ": |p_affine - 0.5| = " + fmt(std::abs(*aff - 0.5)) +
                         " > 1e-6";
      }
      const double hom_v = hom.value_or(std::nan(""));
      csv_rows.push_back(fmt(x) + "," + fmt(*aff) + "," + fmt(hom_v));
      rows_json.push_back(
          {{"x", x}, {"p_affine", *aff}, {"p_homogeneous", hom_v}});
    }
  } else {
    throw std::invalid_argument("unknown benchmark suite: " + suite +
                                " (expected mes, isotropic or biased)");
  }

  rm::io::RunManifest manifest;
  {
    std::ostringstream cmd;
    cmd << "benchmark " << suite;
    if (!d_range.empty()) cmd << " --d " << d_range;
    if (!x_range.empty()) cmd << " --x " << x_range;
    if (!out_path.empty()) cmd << " --out " << out_path;
    manifest.command = cmd.str();
  }
  manifest.config = config;
  manifest.master_seed = g.seed;
  manifest.version = rm::kVersion;
  if (!out_path.empty()) manifest.outputs = {out_path};
  manifest.created_at = rm::io::now_rfc3339();
  const std::string hash_hex = rm::io::manifest_hash_hex(manifest);

  emit_csv(out_path, hash_hex, header, csv_rows, /*to_stdout=*/!g.json);
  if (!out_path.empty()) {
    rm::io::write_manifest(manifest, out_path + ".manifest.json");
  }
  if (g.json) {
    json report;
    report["command"] = "benchmark";
    report["suite"] = suite;
    report["rows"] = rows_json;
    report["golden_pass"] = golden_pass;
    report["manifest_hash"] = hash_hex;
    if (!golden_pass) report["golden_message"] = golden_message;
    std::cout << report.dump(2) << "\n";
  }
  if (!golden_pass) {
    std::cerr << "golden check failed: " << golden_message << "\n";
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const GlobalOpts& g, const std::string& family_spec,
                 const std::string& state_path, std::optional<double> epsilon,
                 std::optional<double> delta, std::optional<long> n_u_opt,
                 int n_s, const std::string& out_prefix, bool serial) {
  if (epsilon.has_value() != delta.has_value()) {
    throw std::invalid_argument("--epsilon and --delta go together");
  }
  if (!epsilon.has_value() && !n_u_opt.has_value()) {
    throw std::invalid_argument(
        "simulate needs --epsilon/--delta (planned budget) or --nu "
        "(explicit budget)");
  }

  const StateSource src = resolve_state(family_spec, state_path);
  const rm::states::DensityMatrix& rho = src.rho;
  const rm::inversion::InversionMaps& maps =
      rm::inversion::load_or_build(rho.d_a, rho.d_b);

  // Exact reference for feasibility reporting.
  const rm::moments::WitnessValue exact = rm::moments::witness(rho, maps.op_norm);
  const double e4_tilde_exact = exact.e4_tilde.value();
  const double epsilon_required_below = std::max(0.0, -e4_tilde_exact);

  long n_u = 0;
  if (n_u_opt.has_value()) {
    n_u = *n_u_opt;
    if (n_u < 1) throw std::invalid_argument("--nu must be >= 1");
  } else {
    const rm::certification::Plan p = rm::certification::plan(*epsilon, *delta);
    n_u = p.n_u;
    n_s = p.n_s;
  }
  if (n_s < 3 || n_s > rm::protocol::kMaxShots) {
    throw std::invalid_argument("--ns must lie in [3, " +
                                std::to_string(rm::protocol::kMaxShots) + "]");
  }

  rm::protocol::ProtocolConfig cfg{rho};
  cfg.n_u = n_u;
  cfg.n_s = n_s;
  cfg.master_seed = g.seed;
  cfg.policy = serial ? rm::protocol::ExecutionPolicy::Serial
                      : rm::protocol::ExecutionPolicy::Parallel;
  cfg.threads = g.threads;
  const rm::protocol::ProtocolResult result = rm::protocol::run_protocol(cfg);

  const rm::moments::WitnessValue estimate =
      rm::inversion::estimate_witness(result.global.y, maps);

  json report;
  report["command"] = "simulate";
  report["state"] = {{"source", src.label}, {"d_a", rho.d_a}, {"d_b", rho.d_b}};
  report["n_u"] = n_u;
  report["n_s"] = n_s;
  report["n_tot"] = n_u * static_cast<long>(n_s);
  report["master_seed"] = g.seed;
  report["op_norm"] = maps.op_norm;
  report["rank"] = maps.rank;
  report["e4_hat"] = estimate.e4;
  report["e4_tilde_hat"] = estimate.e4_tilde.value();
  report["e4_tilde_exact"] = e4_tilde_exact;

  if (n_u >= 2) {
    const rm::certification::CovarianceReport cov =
        rm::certification::covariance_report(result);
    report["covariance"] = {
        {"trace", cov.trace}, {"bound", cov.bound}, {"ratio", cov.ratio}};
  }

  if (epsilon.has_value()) {
    const rm::certification::Certificate cert =
        rm::certification::certify(result, maps, *epsilon, *delta);
    report["epsilon"] = cert.epsilon;
    report["delta_requested"] = cert.delta_requested;
    report["delta_achieved"] = cert.delta_achieved;
    report["certified"] = cert.certified;
    report["margin"] = cert.margin;
    report["epsilon_feasible"] = *epsilon < epsilon_required_below;
    report["epsilon_required_below"] = epsilon_required_below;
  }

  rm::io::RunManifest manifest;
  {
    std::ostringstream cmd;
    cmd << "simulate";
    if (!family_spec.empty()) cmd << " --family " << src.label;
    if (!state_path.empty()) cmd << " --state " << state_path;
    if (epsilon.has_value()) {
      cmd << " --epsilon " << fmt(*epsilon) << " --delta " << fmt(*delta);
    }
    if (n_u_opt.has_value()) cmd << " --nu " << *n_u_opt << " --ns " << n_s;
    cmd << " --seed " << g.seed;
    if (serial) cmd << " --serial";
    if (!out_prefix.empty()) cmd << " --out " << out_prefix;
    manifest.command = cmd.str();
  }
  manifest.config = report;  // the report doubles as the resolved config
  manifest.master_seed = g.seed;
  manifest.version = rm::kVersion;
  if (!out_prefix.empty()) {
    manifest.outputs = {out_prefix + ".report.json",
                        out_prefix + ".records.jsonl"};
  }
  manifest.created_at = rm::io::now_rfc3339();
  const std::string hash_hex = rm::io::manifest_hash_hex(manifest);
  report["manifest_hash"] = hash_hex;

  if (!out_prefix.empty()) {
    rm::io::write_text_file(out_prefix + ".report.json", report.dump(2) + "\n");
    rm::io::write_setting_records(result, out_prefix + ".records.jsonl",
                                  hash_hex);
    rm::io::write_manifest(manifest, out_prefix + ".manifest.json");
  }

  if (g.json) {
    std::cout << report.dump(2) << "\n";
  } else {
    std::cout << "state: " << src.label << " (d_a=" << rho.d_a
              << ", d_b=" << rho.d_b << ")\n";
    std::cout << "budget: n_u=" << n_u << " n_s=" << n_s
              << " n_tot=" << n_u * static_cast<long>(n_s)
              << " seed=" << g.seed << "\n";
    std::cout << "e4_tilde_hat = " << fmt(estimate.e4_tilde.value())
              << "  (exact " << fmt(e4_tilde_exact) << ")\n";
    if (epsilon.has_value()) {
      std::cout << "epsilon = " << fmt(*epsilon)
                << "  delta_requested = " << fmt(*delta)
                << "  delta_achieved = " << fmt(report["delta_achieved"].get<double>())
                << "\n";
      std::cout << "certified = "
                << (report["certified"].get<bool>() ? "true" : "false")
                << "  margin = " << fmt(report["margin"].get<double>()) << "\n";
      if (!report["epsilon_feasible"].get<bool>()) {
        std::cout << "note: certification needs epsilon < "
                  << fmt(epsilon_required_below)
                  << " for this state; requested epsilon cannot certify even "
                     "in expectation\n";
      }
    }
    if (!out_prefix.empty()) {
      std::cout << "outputs: " << out_prefix << ".report.json, " << out_prefix
                << ".records.jsonl, " << out_prefix << ".manifest.json\n";
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// plan

int cmd_plan(const GlobalOpts& g, double epsilon, double delta) {
  const rm::certification::Plan p = rm::certification::plan(epsilon, delta);
  if (g.json) {
    json j;
    j["command"] = "plan";
    j["epsilon"] = p.epsilon;
    j["delta"] = p.delta;
    j["n_tot"] = p.n_tot;
    j["n_u"] = p.n_u;
    j["n_s"] = p.n_s;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "epsilon = " << fmt(p.epsilon) << "\n"
              << "delta = " << fmt(p.delta) << "\n"
              << "n_tot = " << p.n_tot << "\n"
              << "n_u = " << p.n_u << "\n"
              << "n_s = " << p.n_s << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "redmoment: third-order reduction-moment entanglement witness "
      "(exact evaluation and randomized-measurement estimation)"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_flag("--json", g.json, "emit machine-readable JSON on stdout");
  app.add_option("--seed", g.seed, "master seed for all randomness")
      ->default_val(0);
  app.add_option("--threads", g.threads,
                 "worker threads (0 = runtime default); results are "
                 "independent of this value")
      ->default_val(0);

  std::string family_spec, state_path;
  auto* witness = app.add_subcommand(
      "witness", "exact witness evaluation for a state");
  witness->fallthrough();
  witness->add_option("--family", family_spec,
                      "family spec: name:key=val,... (mes, iso, biased, "
                      "mixed, product)");
  witness->add_option("--state", state_path, "density-matrix JSON file");

  std::string suite, d_range, x_range, out_path;
  auto* benchmark = app.add_subcommand(
      "benchmark", "closed-form reproduction suites with golden checks");
  benchmark->fallthrough();
  benchmark->add_option("suite", suite, "mes | isotropic | biased")
      ->required();
  benchmark->add_option("--d", d_range, "dimension range lo..hi");
  benchmark->add_option("--x", x_range, "bias range lo..hi[:step]");
  benchmark->add_option("--out", out_path, "CSV output path");

  std::string sim_family, sim_state, sim_out;
  std::optional<double> sim_epsilon, sim_delta;
  std::optional<long> sim_nu;
  int sim_ns = 3;
  bool sim_serial = false;
  auto* simulate = app.add_subcommand(
      "simulate", "randomized-measurement estimation with certification");
  simulate->fallthrough();
  simulate->add_option("--family", sim_family, "family spec");
  simulate->add_option("--state", sim_state, "density-matrix JSON file");
  simulate->add_option("--epsilon", sim_epsilon, "accuracy target");
  simulate->add_option("--delta", sim_delta, "confidence target in (0,1)");
  simulate->add_option("--nu", sim_nu, "explicit number of unitary settings");
  simulate->add_option("--ns", sim_ns, "shots per setting")->default_val(3);
  simulate->add_option("--out", sim_out,
                       "output prefix for report/records/manifest");
  simulate->add_flag("--serial", sim_serial, "force serial execution");

  double plan_epsilon = 0.0, plan_delta = 0.0;
  auto* plan = app.add_subcommand("plan", "measurement budget for a target");
  plan->fallthrough();
  plan->add_option("--epsilon", plan_epsilon, "accuracy target")->required();
  plan->add_option("--delta", plan_delta, "confidence target in (0,1)")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

#ifdef _OPENMP
  if (g.threads > 0) omp_set_num_threads(g.threads);
#endif

  try {
    if (*witness) return cmd_witness(g, family_spec, state_path);
    if (*benchmark) return cmd_benchmark(g, suite, d_range, x_range, out_path);
    if (*simulate)
      return cmd_simulate(g, sim_family, sim_state, sim_epsilon, sim_delta,
                          sim_nu, sim_ns, sim_out, sim_serial);
    if (*plan) return cmd_plan(g, plan_epsilon, plan_delta);
  } catch (const GoldenFailure& e) {
    std::cerr << "golden check failed: " << e.what() << "\n";
    return 1;
  } catch (const rm::states::StateError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
