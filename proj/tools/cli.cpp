#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "fluidq/csv.hpp"
#include "fluidq/density.hpp"
#include "fluidq/doubling.hpp"
#include "fluidq/error.hpp"
#include "fluidq/model.hpp"
#include "fluidq/oracle.hpp"

namespace fluidq::cli {

namespace {

using Eigen::MatrixXd;

constexpr Variant kCompareOrder[] = {Variant::kGlx, Variant::kXxl,
                                     Variant::kComp};

struct RunReport {
  std::string command;
  std::string model_fingerprint;
  std::string variant;
  std::string scheme;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<double> eta;
  std::optional<int> iterations;
  double wall_time_s = 0.0;
  std::vector<std::string> outputs;
  std::string status = "ok";
  std::string error;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["model_fingerprint"] = model_fingerprint;
    j["variant"] = variant;
    j["scheme"] = scheme;
    j["alpha"] = alpha ? nlohmann::json(*alpha) : nlohmann::json();
    j["beta"] = beta ? nlohmann::json(*beta) : nlohmann::json();
    j["eta"] = eta ? nlohmann::json(*eta) : nlohmann::json();
    j["iterations"] = iterations ? nlohmann::json(*iterations) : nlohmann::json();
    j["wall_time_s"] = wall_time_s;
    j["outputs"] = outputs;
    j["status"] = status;
    if (!error.empty()) j["error"] = error;
    return j;
  }
};

struct SolverFlags {
  std::string variant = "comp";
  std::string scheme = "sda";
  double eta = kDefaultEta;
  std::optional<double> tol;
  int max_iter = 100;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content,
                RunReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write '" + path + "'");
  out << content;
  if (!out) throw ModelError("write to '" + path + "' failed");
  report.outputs.push_back(path);
}

FluidQueueModel load_model(const std::string& path, RunReport& report) {
  const std::string text = read_file(path);
  report.model_fingerprint = fingerprint(text);
  return parse_model(text);
}

std::string matrix_csv(const MatrixXd& m) {
  std::ostringstream s;
  write_csv(s, m);
  return s.str();
}

void add_solver_flags(CLI::App* sub, SolverFlags& f, bool with_variant) {
  if (with_variant) {
    sub->add_option("--variant", f.variant, "comp, xxl or glx")
        ->capture_default_str();
  }
  sub->add_option("--scheme", f.scheme, "sda, sda-ss or adda")
      ->capture_default_str();
  sub->add_option("--eta", f.eta, "safety factor in (0, 1]")
      ->capture_default_str();
  sub->add_option("--tol", f.tol, "stopping tolerance (default n*eps)");
  sub->add_option("--max-iter", f.max_iter, "iteration cap")
      ->capture_default_str();
}

DoublingParameters parameters_for(const FluidQueueModel& model,
                                  const SolverFlags& f, RunReport& report) {
  const DoublingParameters p =
      make_parameters(model, parse_scheme(f.scheme), f.eta);
  report.scheme = std::string(to_string(p.scheme));
  report.alpha = p.alpha;
  report.beta = p.beta;
  report.eta = p.eta;
  return p;
}

RiccatiSolution run_solver(const FluidQueueModel& model,
                           const DoublingParameters& params,
                           const SolverFlags& f, Variant variant,
                           RunReport& report) {
  SolveOptions opts;
  opts.variant = variant;
  opts.tol = f.tol;
  opts.max_iter = f.max_iter;
  try {
    RiccatiSolution sol = solve_riccati(model, params, opts);
    report.iterations = sol.diagnostics.iterations;
    return sol;
  } catch (const ConvergenceError& e) {
    report.iterations = e.diagnostics().iterations;
    throw;
  }
}

void print_diagnostics(const ConvergenceDiagnostics& d, std::ostream& out) {
  out << "variant: " << to_string(d.variant) << "\n";
  out << "scheme: " << to_string(d.scheme) << "\n";
  out << "iterations: " << d.iterations << "\n";
  for (std::size_t k = 0; k < d.increment_ratios.size(); ++k) {
    out << "  step " << (k + 1)
        << " increment ratio " << format_real(d.increment_ratios[k]) << "\n";
  }
  out << "lambda: " << (d.lambda ? format_real(*d.lambda) : "unknown") << "\n";
  out << "delta: " << (d.delta ? format_real(*d.delta) : "unknown") << "\n";
  for (const auto& w : d.warnings) out << "warning: " << w << "\n";
}

std::string companion_path(const std::string& out) {
  const std::string ext = ".csv";
  if (out.size() > ext.size() &&
      out.compare(out.size() - ext.size(), ext.size(), ext) == 0) {
    return out.substr(0, out.size() - ext.size()) + "_pminus.csv";
  }
  return out + ".pminus.csv";
}

struct VariantErrors {
  Variant variant;
  ErrorMetrics metrics;
  int iterations = 0;
  MatrixXd relative;
};

std::vector<VariantErrors> compare_variants(const FluidQueueModel& model,
                                            const DoublingParameters& params,
                                            const SolverFlags& f,
                                            const ExtendedRiccati& reference) {
  std::vector<VariantErrors> rows;
  for (Variant v : kCompareOrder) {
    SolveOptions opts;
    opts.variant = v;
    opts.tol = f.tol;
    opts.max_iter = f.max_iter;
    const RiccatiSolution sol = solve_riccati(model, params, opts);
    VariantErrors row{v, error_metrics(sol.psi, reference.psi),
                      sol.diagnostics.iterations,
                      relative_error_matrix(sol.psi, reference.psi)};
    rows.push_back(std::move(row));
  }
  return rows;
}

// Normwise (2-norm) and componentwise errors of one density row.
std::pair<double, double> vector_errors(const Eigen::RowVectorXd& approx,
                                        const Eigen::RowVectorXd& ref) {
  const double ref_norm = ref.norm();
  const double e_norm = ref_norm > 0.0 ? (approx - ref).norm() / ref_norm
                                       : (approx - ref).norm();
  double e_cw = 0.0;
  for (Eigen::Index i = 0; i < ref.size(); ++i) {
    const double d = std::abs(approx(i) - ref(i));
    if (ref(i) != 0.0) {
      e_cw = std::max(e_cw, d / std::abs(ref(i)));
    } else if (d != 0.0) {
      e_cw = std::numeric_limits<double>::infinity();
    }
  }
  return {e_norm, e_cw};
}

int thread_count(std::size_t tasks) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FLUIDQ_THREADS")) {
    int v = 0;
    const std::string_view s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec == std::errc() && res.ptr == s.data() + s.size() && v > 0) {
      n = static_cast<unsigned>(v);
    }
  }
  return static_cast<int>(std::min<std::size_t>(n, tasks));
}

int cmd_solve(const std::string& model_path, const SolverFlags& f,
              const std::string& out_path, const std::string& psi_hat_path,
              RunReport& report, std::ostream& out) {
  const FluidQueueModel model = load_model(model_path, report);
  const Variant variant = parse_variant(f.variant);
  report.variant = std::string(to_string(variant));
  const DoublingParameters params = parameters_for(model, f, report);
  const RiccatiSolution sol = run_solver(model, params, f, variant, report);
  print_diagnostics(sol.diagnostics, out);
  write_file(out_path, matrix_csv(sol.psi), report);
  if (!psi_hat_path.empty()) {
    write_file(psi_hat_path, matrix_csv(sol.psi_hat), report);
  }
  return kExitOk;
}

int cmd_density(const std::string& model_path, const SolverFlags& f,
                const std::string& points, const std::string& out_path,
                std::string pminus_path, RunReport& report, std::ostream& out) {
  const FluidQueueModel model = load_model(model_path, report);
  const std::vector<double> levels = parse_points(points);
  const Variant variant = parse_variant(f.variant);
  report.variant = std::string(to_string(variant));
  const DoublingParameters params = parameters_for(model, f, report);
  const RiccatiSolution sol = run_solver(model, params, f, variant, report);
  const DensityResult d = stationary_density(model, sol, levels);

  std::ostringstream csv;
  csv << "x";
  for (int i = 0; i < model.n(); ++i) csv << ",f" << (i + 1);
  csv << ",total\n";
  for (std::size_t j = 0; j < levels.size(); ++j) {
    const Eigen::RowVectorXd row = d.rows.row(static_cast<Eigen::Index>(j));
    csv << format_real(levels[j]);
    for (Eigen::Index i = 0; i < row.size(); ++i) {
      csv << "," << format_real(row(i));
    }
    csv << "," << format_real(row.sum()) << "\n";
  }
  write_file(out_path, csv.str(), report);
  if (pminus_path.empty()) pminus_path = companion_path(out_path);
  write_file(pminus_path, matrix_csv(d.mass.p_minus), report);
  out << "iterations: " << sol.diagnostics.iterations << "\n";
  out << "levels: " << levels.size() << "\n";
  return kExitOk;
}

int cmd_compare(const std::string& model_path, const SolverFlags& f,
                int digits, const std::string& out_path,
                const std::string& error_matrix_path,
                const std::string& density_points,
                const std::string& density_out, RunReport& report,
                std::ostream& out) {
  const FluidQueueModel model = load_model(model_path, report);
  report.variant = "glx,xxl,comp";
  const DoublingParameters params = parameters_for(model, f, report);
  const ExtendedRiccati reference = solve_riccati_extended(model, digits);
  const std::vector<VariantErrors> rows =
      compare_variants(model, params, f, reference);

  std::ostringstream csv;
  csv << "variant,e_norm,e_cw,iterations\n";
  for (const auto& r : rows) {
    csv << to_string(r.variant) << "," << format_real(r.metrics.e_norm) << ","
        << format_real(r.metrics.e_cw) << "," << r.iterations << "\n";
    out << to_string(r.variant) << ": e_norm " << format_real(r.metrics.e_norm)
        << " e_cw " << format_real(r.metrics.e_cw) << " iterations "
        << r.iterations << "\n";
  }
  write_file(out_path, csv.str(), report);

  if (!error_matrix_path.empty()) {
    std::ostringstream em;
    em << "variant,row,col,relative_error\n";
    for (const auto& r : rows) {
      for (Eigen::Index i = 0; i < r.relative.rows(); ++i) {
        for (Eigen::Index j = 0; j < r.relative.cols(); ++j) {
          em << to_string(r.variant) << "," << (i + 1) << "," << (j + 1) << ","
             << format_real(r.relative(i, j)) << "\n";
        }
      }
    }
    write_file(error_matrix_path, em.str(), report);
  }

  if (!density_points.empty()) {
    const std::vector<double> levels = parse_points(density_points);
    const ExtendedDensity ref = density_extended(model, levels, digits);
    std::vector<DensityResult> approx;
    for (Variant v : kCompareOrder) {
      SolveOptions opts;
      opts.variant = v;
      opts.tol = f.tol;
      opts.max_iter = f.max_iter;
      approx.push_back(
          stationary_density(model, solve_riccati(model, params, opts), levels));
    }
    std::ostringstream dc;
    dc << "x,total";
    for (Variant v : kCompareOrder) {
      dc << "," << to_string(v) << "_e_norm," << to_string(v) << "_e_cw";
    }
    dc << "\n";
    for (std::size_t j = 0; j < levels.size(); ++j) {
      const auto idx = static_cast<Eigen::Index>(j);
      const Eigen::RowVectorXd r = ref.rows.row(idx);
      dc << format_real(levels[j]) << "," << format_real(r.sum());
      for (const auto& a : approx) {
        const auto [en, ec] = vector_errors(a.rows.row(idx), r);
        dc << "," << format_real(en) << "," << format_real(ec);
      }
      dc << "\n";
    }
    write_file(density_out, dc.str(), report);
  }
  return kExitOk;
}

int cmd_example(const std::string& name, double kappa, std::string out_path,
                bool sweep, const std::string& sweep_out, int digits,
                const SolverFlags& f, RunReport& report, std::ostream& out) {
  if (name != "weakly-connected" && name != "cascading") {
    throw ModelError("unknown example '" + name +
                     "' (expected weakly-connected or cascading)");
  }
  if (sweep) {
    if (name != "cascading") {
      throw ModelError("--sweep is only defined for the cascading example");
    }
    std::vector<double> kappas;
    for (int e = 0; e <= 8; ++e) kappas.push_back(std::pow(10.0, e));
    std::vector<std::vector<VariantErrors>> results(kappas.size());
    std::vector<std::exception_ptr> errors(kappas.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < kappas.size(); i = next++) {
        try {
          const FluidQueueModel m = cascading_model(kappas[i]);
          const DoublingParameters p =
              make_parameters(m, parse_scheme(f.scheme), f.eta);
          results[i] =
              compare_variants(m, p, f, solve_riccati_extended(m, digits));
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    const int threads = thread_count(kappas.size());
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    report.variant = "glx,xxl,comp";
    report.scheme = f.scheme;
    report.eta = f.eta;
    report.model_fingerprint =
        fingerprint(format_model(cascading_model(kappas.front())));

    std::ostringstream csv;
    csv << "kappa";
    for (Variant v : kCompareOrder) {
      csv << "," << to_string(v) << "_e_norm," << to_string(v) << "_e_cw";
    }
    csv << "\n";
    for (std::size_t i = 0; i < kappas.size(); ++i) {
      csv << format_real(kappas[i]);
      for (const auto& r : results[i]) {
        csv << "," << format_real(r.metrics.e_norm) << ","
            << format_real(r.metrics.e_cw);
      }
      csv << "\n";
    }
    write_file(sweep_out, csv.str(), report);
    out << "sweep: " << kappas.size() << " rates\n";
    return kExitOk;
  }

  std::string text;
  if (name == "weakly-connected") {
    text = format_model(weakly_connected_model(),
                        "weakly connected queue: phases {1, 6} are reached "
                        "from {2, 3, 4, 5} only through a 1e-8 rate");
    if (out_path.empty()) out_path = "weakly_connected.fq";
  } else {
    text = format_model(cascading_model(kappa),
                        "cascading queue: base phase 8, chain "
                        "8 -> 4 -> 7 -> 3 -> 6 -> 2 -> 5 -> 1 of 0.01 rates, "
                        "kappa = " + format_real(kappa));
    if (out_path.empty()) out_path = "cascading.fq";
  }
  report.model_fingerprint = fingerprint(text);
  write_file(out_path, text, report);
  return kExitOk;
}

std::string join_args(const std::vector<std::string>& args) {
  std::string s = "fluidq";
  for (const auto& a : args) s += " " + a;
  return s;
}

}  // namespace

std::vector<double> parse_points(std::string_view text) {
  std::string s;
  for (char ch : text) {
    if (!std::isspace(static_cast<unsigned char>(ch))) s.push_back(ch);
  }
  auto parse_number = [](std::string_view tok) {
    double v = 0.0;
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() ||
        !std::isfinite(v)) {
      throw ModelError("bad number '" + std::string(tok) + "' in --points");
    }
    return v;
  };
  auto split = [](std::string_view body) {
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (true) {
      const auto comma = body.find(',', pos);
      parts.push_back(body.substr(pos, comma == std::string_view::npos
                                            ? std::string_view::npos
                                            : comma - pos));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    return parts;
  };

  const std::string_view prefix = "logrange(";
  std::vector<double> points;
  if (s.rfind(prefix, 0) == 0) {
    if (s.back() != ')') throw ModelError("--points: missing ')'");
    const auto parts = split(std::string_view(s).substr(
        prefix.size(), s.size() - prefix.size() - 1));
    if (parts.size() != 3) {
      throw ModelError("--points: logrange takes (a, b, k)");
    }
    const double a = parse_number(parts[0]);
    const double b = parse_number(parts[1]);
    int k = 0;
    const auto res =
        std::from_chars(parts[2].data(), parts[2].data() + parts[2].size(), k);
    if (res.ec != std::errc() || res.ptr != parts[2].data() + parts[2].size() ||
        k < 1) {
      throw ModelError("--points: logrange count must be a positive integer");
    }
    if (!(a > 0.0) || !(b > 0.0)) {
      throw ModelError("--points: logrange bounds must be positive");
    }
    if (k == 1) return {a};
    const double la = std::log(a);
    const double lb = std::log(b);
    for (int i = 0; i < k; ++i) {
      points.push_back(i == 0       ? a
                       : i == k - 1 ? b
                                    : std::exp(la + (lb - la) * i / (k - 1)));
    }
    return points;
  }
  if (s.empty()) throw ModelError("--points is empty");
  for (auto tok : split(s)) points.push_back(parse_number(tok));
  return points;
}

std::string fingerprint(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Componentwise accurate fluid queue solver"};
  app.name("fluidq");
  app.require_subcommand(1);

  std::string model_path;
  std::string out_path;
  std::string report_path;
  SolverFlags flags;

  auto* solve = app.add_subcommand("solve", "compute Psi");
  std::string psi_hat_path;
  solve->add_option("--model", model_path, "model file")->required();
  add_solver_flags(solve, flags, true);
  solve->add_option("--out", out_path, "Psi CSV")->default_str("psi.csv");
  solve->add_option("--psi-hat", psi_hat_path, "also write Psi-hat");
  solve->add_option("--report", report_path, "JSON run report");

  auto* density = app.add_subcommand("density", "stationary density f(x)");
  std::string points;
  std::string pminus_path;
  density->add_option("--model", model_path, "model file")->required();
  density->add_option("--points", points,
                      "comma list or logrange(a,b,k)")->required();
  add_solver_flags(density, flags, true);
  density->add_option("--out", out_path, "density CSV")
      ->default_str("density.csv");
  density->add_option("--pminus", pminus_path, "boundary mass CSV");
  density->add_option("--report", report_path, "JSON run report");

  auto* compare = app.add_subcommand("compare", "GLX, XXL and COMP vs oracle");
  int digits = kMinOracleDigits;
  std::string error_matrix_path;
  std::string density_points;
  std::string density_out = "compare_density.csv";
  compare->add_option("--model", model_path, "model file")->required();
  compare->add_option("--digits", digits, "oracle precision")
      ->capture_default_str();
  add_solver_flags(compare, flags, false);
  compare->add_option("--out", out_path, "error table CSV")
      ->default_str("compare.csv");
  compare->add_option("--error-matrix", error_matrix_path,
                      "entrywise relative errors CSV");
  compare->add_option("--density-points", density_points,
                      "levels for density errors");
  compare->add_option("--density-out", density_out, "density error CSV")
      ->capture_default_str();
  compare->add_option("--report", report_path, "JSON run report");

  auto* example = app.add_subcommand("example", "write a built-in model");
  std::string name;
  double kappa = 1.0;
  bool sweep = false;
  std::string sweep_out = "cascading_sweep.csv";
  example->add_option("--name", name, "weakly-connected or cascading")
      ->required();
  example->add_option("--kappa", kappa, "fluid rate of phase 1 (cascading)")
      ->capture_default_str();
  example->add_option("--out", out_path, "model file");
  example->add_flag("--sweep", sweep, "compare over kappa = 1e0 .. 1e8");
  example->add_option("--sweep-out", sweep_out, "sweep CSV")
      ->capture_default_str();
  example->add_option("--digits", digits, "oracle precision")
      ->capture_default_str();
  add_solver_flags(example, flags, false);
  example->add_option("--report", report_path, "JSON run report");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  RunReport report;
  report.command = join_args(args);
  const auto start = std::chrono::steady_clock::now();
  int code = kExitOk;
  try {
    if (solve->parsed()) {
      if (out_path.empty()) out_path = "psi.csv";
      code = cmd_solve(model_path, flags, out_path, psi_hat_path, report, out);
    } else if (density->parsed()) {
      if (out_path.empty()) out_path = "density.csv";
      code = cmd_density(model_path, flags, points, out_path, pminus_path,
                         report, out);
    } else if (compare->parsed()) {
      if (out_path.empty()) out_path = "compare.csv";
      code = cmd_compare(model_path, flags, digits, out_path, error_matrix_path,
                         density_points, density_out, report, out);
    } else {
      code = cmd_example(name, kappa, out_path, sweep, sweep_out, digits, flags,
                         report, out);
    }
  } catch (const ModelError& e) {
    report.status = "error";
    report.error = e.what();
    err << "error: " << e.what() << "\n";
    code = kExitUsage;
  } catch (const std::exception& e) {
    report.status = "error";
    report.error = e.what();
    err << "error: " << e.what() << "\n";
    code = kExitNumeric;
  }
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  if (!report_path.empty()) {
    std::ofstream rep(report_path);
    if (rep) {
      report.outputs.push_back(report_path);
      rep << report.to_json().dump(2) << "\n";
    } else {
      err << "error: cannot write report '" << report_path << "'\n";
      if (code == kExitOk) code = kExitUsage;
    }
  }
  return code;
}

}  // namespace fluidq::cli
