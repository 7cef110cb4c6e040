#include "seqhom/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "seqhom/benchmarks.hpp"
#include "seqhom/box_geometry.hpp"
#include "seqhom/flow_sim.hpp"

namespace seqhom {

using nlohmann::json;

namespace {

DriverParams pendulum_driver() {
  DriverParams d;
  d.rho = 1.0;
  return d;
}

std::vector<ExperimentInfo> build_catalog() {
  std::vector<ExperimentInfo> c;
  c.push_back({"pendulum-flow",
               "Forward Euler gradient/antigradient flow of the pendulum for several rho",
               {{"z0", {0.01, 1.0, -0.5}},
                {"rhos", {1.0, 10.0}},
                {"h", 1e-3},
                {"t_final", 50.0},
                {"gamma1", 0.5},
                {"gamma2", 0.5},
                {"gamma3", nullptr},
                {"sample_stride", 10}},
               DriverParams{}});
  c.push_back({"pendulum-streamlines",
               "Gradient flow and Newton flow trajectories from a grid of primal points",
               {{"y0", -0.5},
                {"grid", 9},
                {"extent", 1.5},
                {"rho", 1.0},
                {"h", 1e-3},
                {"t_final", 5.0},
                {"sample_stride", 50}},
               DriverParams{}});
  c.push_back({"pendulum-euler",
               "Exact projected backward Euler steps at fixed dt; error versus step",
               {{"z0", {0.01, 1.0, -0.5}},
                {"dts", {1.0, 10.0, 100.0, 1000.0, 10000.0}},
                {"steps", 6},
                {"rho", 1.0}},
               DriverParams{}});
  c.push_back({"pendulum-homotopy",
               "Sequential homotopy method on the pendulum, plus perturbed starts at the maximum",
               {{"z0", {0.01, 1.0, -0.5}}, {"perturbations", 100}, {"radius", 1e-2}},
               pendulum_driver()});
  c.push_back({"scalar-stability",
               "Spectrum and flow of the scalar example for several rho",
               {{"rhos", {0.0, 0.5, 1.0, 2.0, 3.0, 10.0}},
                {"z0", {1.0, 0.0}},
                {"h", 1e-3},
                {"t_final", 20.0}},
               DriverParams{}});
  c.push_back({"elliptic",
               "Quasilinear elliptic optimal control problem, one instance",
               {{"n", 32}, {"p", 0.0}, {"gamma", 1e-2}},
               DriverParams{}});
  c.push_back({"table1",
               "Counter table over p, N and gamma for the elliptic problem",
               {{"ps", {0.0, 1.0, 2.0}},
                {"ns", {16, 32, 64}},
                {"gammas", {1e-2}},
                {"threads", 0}},
               DriverParams{}});
  c.push_back({"random-qp",
               "Sequential homotopy method on a seeded random quadratic program",
               {{"n", 10}, {"m", 4}, {"bound", nullptr}},
               DriverParams{}});
  return c;
}

// Object keys of `overlay` must exist in `target`; values must keep the
// default's type (any number for numbers, anything for null defaults).
void merge_checked(json& target, const json& overlay, const std::string& path) {
  if (!overlay.is_object()) throw ConfigError("expected an object at '" + path + "'");
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!target.contains(it.key())) throw ConfigError("unknown configuration key '" + key + "'");
    json& slot = target[it.key()];
    const json& value = it.value();
    if (slot.is_object()) {
      merge_checked(slot, value, key);
      continue;
    }
    const bool ok = slot.is_null() || (slot.is_number() && value.is_number()) ||
                    slot.type() == value.type();
    if (!ok) {
      throw ConfigError("configuration key '" + key + "' expects " +
                        std::string(slot.type_name()) + ", got " + value.type_name());
    }
    if (slot.is_number_integer() && value.is_number_float()) {
      throw ConfigError("configuration key '" + key + "' expects an integer");
    }
    slot = value;
  }
}

template <class T>
T field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid value for '") + key + "': " + e.what());
  }
}

std::optional<double> optional_number(const json& j, const char* key) {
  if (j.at(key).is_null()) return std::nullopt;
  return field<double>(j, key);
}

PrimalDual point_from(const json& j, const char* key, Index nx, Index ny) {
  const auto v = field<std::vector<double>>(j, key);
  if (static_cast<Index>(v.size()) != nx + ny) {
    throw ConfigError(std::string("'") + key + "' must have " + std::to_string(nx + ny) +
                      " entries");
  }
  PrimalDual z{Vector(nx), Vector(ny)};
  for (Index i = 0; i < nx; ++i) z.x[i] = v[static_cast<std::size_t>(i)];
  for (Index i = 0; i < ny; ++i) z.y[i] = v[static_cast<std::size_t>(nx + i)];
  return z;
}

std::string number_tag(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

class Outputs {
 public:
  explicit Outputs(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  void write(const std::string& name, const std::function<void(std::ostream&)>& body) const {
    std::ofstream os(dir_ / name);
    if (!os) throw std::runtime_error("cannot open output file " + (dir_ / name).string());
    body(os);
  }

  void write_solve_log(const SolveLog& log) const {
    write("solve_log.csv", [&](std::ostream& os) { log.write_csv(os); });
    write("solve_log.json", [&](std::ostream& os) { log.write_json(os); });
  }

 private:
  std::filesystem::path dir_;
};

json solve_summary(const SolveResult& r, const ProblemSpec& spec, double rho) {
  const Criticality crit = criticality_residual(r.z, spec, rho);
  json j{{"status", to_string(r.status)},
         {"mat", r.mat},
         {"res", r.res},
         {"disc", r.discarded},
         {"outer_iterations", r.outer_iterations},
         {"final_lambda", r.final_lambda},
         {"flow_time", r.flow_time},
         {"stationarity", crit.stationarity},
         {"feasibility", crit.feasibility}};
  if (r.warning) j["warning"] = *r.warning;
  return j;
}

std::vector<double> flatten(const PrimalDual& z) {
  std::vector<double> v(z.x.data(), z.x.data() + z.x.size());
  v.insert(v.end(), z.y.data(), z.y.data() + z.y.size());
  return v;
}

bool run_pendulum_flow(const ExperimentConfig& cfg, const Outputs& out, json& summary,
                       std::ostream& log) {
  const ProblemSpec spec = pendulum_problem();
  const json& p = cfg.problem;
  const PrimalDual z0 = point_from(p, "z0", 2, 1);
  FlowOptions options;
  options.h = field<double>(p, "h");
  options.t_final = field<double>(p, "t_final");
  options.gamma1 = field<double>(p, "gamma1");
  options.gamma2 = field<double>(p, "gamma2");
  options.gamma3 = optional_number(p, "gamma3");
  options.sample_stride = field<int>(p, "sample_stride");
  json runs = json::array();
  for (double rho : field<std::vector<double>>(p, "rhos")) {
    options.rho = rho;
    const FlowTrajectory traj = integrate_flow(z0, spec, options);
    const std::string file = "trajectory_rho_" + number_tag(rho) + ".csv";
    out.write(file, [&](std::ostream& os) { write_trajectory_csv(os, traj); });
    const PrimalDual& zt = traj.states.back();
    const double dist_min = std::hypot(zt.x[0], zt.x[1] + 1.0, zt.y[0] - 0.5);
    log << "rho = " << rho << ": terminal distance to minimum " << dist_min
        << ", max ||c|| " << traj.max_norm_c() << "\n";
    runs.push_back({{"rho", rho},
                    {"file", file},
                    {"terminal", flatten(zt)},
                    {"distance_to_minimum", dist_min},
                    {"max_norm_c", traj.max_norm_c()},
                    {"violations_L", traj.violations_L},
                    {"violations_c", traj.violations_c},
                    {"violations_gronwall", traj.violations_gronwall}});
  }
  summary["runs"] = runs;
  return true;
}

bool run_pendulum_streamlines(const ExperimentConfig& cfg, const Outputs& out, json& summary,
                              std::ostream& log) {
  const ProblemSpec spec = pendulum_problem();
  const json& p = cfg.problem;
  const double y0 = field<double>(p, "y0");
  const int grid = field<int>(p, "grid");
  const double extent = field<double>(p, "extent");
  const double rho = field<double>(p, "rho");
  const double h = field<double>(p, "h");
  const double t_final = field<double>(p, "t_final");
  const int stride = field<int>(p, "sample_stride");
  if (grid < 2 || !(extent > 0.0) || !(h > 0.0) || stride < 1) {
    throw ConfigError("pendulum-streamlines: need grid >= 2, extent > 0, h > 0, stride >= 1");
  }
  const long steps = static_cast<long>(std::ceil(t_final / h - 1e-9));

  std::ostringstream grad_csv;
  std::ostringstream newton_csv;
  grad_csv << "traj,t,x1,x2,y\n" << std::setprecision(17);
  newton_csv << "traj,t,x1,x2,y\n" << std::setprecision(17);
  long newton_singular = 0;
  long diverged = 0;
  int traj = 0;
  for (int j = 0; j < grid; ++j) {
    for (int i = 0; i < grid; ++i, ++traj) {
      PrimalDual z0(Vector(2), Vector(1));
      z0.x << -extent + 2.0 * extent * i / (grid - 1), -extent + 2.0 * extent * j / (grid - 1);
      z0.y << y0;
      PrimalDual z = z0;
      PrimalDual zn = z0;
      bool grad_alive = true;
      bool newton_alive = true;
      for (long k = 0; k <= steps && (grad_alive || newton_alive); ++k) {
        const double t = static_cast<double>(k) * h;
        if (k % stride == 0 || k == steps) {
          if (grad_alive) {
            grad_csv << traj << ',' << t << ',' << z.x[0] << ',' << z.x[1] << ',' << z.y[0] << '\n';
          }
          if (newton_alive) {
            newton_csv << traj << ',' << t << ',' << zn.x[0] << ',' << zn.x[1] << ',' << zn.y[0]
                       << '\n';
          }
        }
        if (k == steps) break;
        if (grad_alive) {
          z = forward_euler_step(z, h, spec, rho);
          if (!z.all_finite() || z_norm(z, spec) > 1e6) {
            grad_alive = false;
            ++diverged;
          }
        }
        if (newton_alive) {
          try {
            zn = newton_flow_step(zn, h, spec, rho);
          } catch (const NewtonFlowSingularError&) {
            newton_alive = false;
            ++newton_singular;
          }
        }
      }
    }
  }
  out.write("streamlines_gradient.csv", [&](std::ostream& os) { os << grad_csv.str(); });
  out.write("streamlines_newton.csv", [&](std::ostream& os) { os << newton_csv.str(); });
  log << traj << " trajectories, " << newton_singular << " Newton flows hit a singular Hessian\n";
  summary["trajectories"] = traj;
  summary["newton_singular"] = newton_singular;
  summary["gradient_diverged"] = diverged;
  return true;
}

bool run_pendulum_euler(const ExperimentConfig& cfg, const Outputs& out, json& summary,
                        std::ostream& log) {
  const ProblemSpec spec = pendulum_problem();
  const json& p = cfg.problem;
  const PrimalDual z0 = point_from(p, "z0", 2, 1);
  const int steps = field<int>(p, "steps");
  const double rho = field<double>(p, "rho");
  PrimalDual zstar(Vector(2), Vector(1));
  zstar.x << 0.0, -1.0;
  zstar.y << 0.5;
  const double e0 = z_norm(z0 - zstar, spec);

  std::ostringstream csv;
  csv << "dt,step,rel_error,ratio\n" << std::setprecision(17);
  json rates = json::array();
  for (double dt : field<std::vector<double>>(p, "dts")) {
    if (!(dt > 0.0)) throw ConfigError("pendulum-euler: dt must be positive");
    const std::vector<PrimalDual> iterates = fixed_lambda_solve(spec, z0, 1.0 / dt, rho, steps);
    std::vector<double> errors;
    for (std::size_t k = 0; k < iterates.size(); ++k) {
      errors.push_back(z_norm(iterates[k] - zstar, spec) / e0);
      csv << dt << ',' << k << ',' << errors.back() << ',';
      if (k > 0) csv << errors[k] / errors[k - 1];
      csv << '\n';
    }
    json row{{"dt", dt}, {"errors", errors}};
    log << "dt = " << dt << ": step-1 error " << (errors.size() > 1 ? errors[1] : errors[0])
        << "\n";
    rates.push_back(row);
  }
  out.write("euler_rates.csv", [&](std::ostream& os) { os << csv.str(); });
  summary["series"] = rates;
  return true;
}

bool run_pendulum_homotopy(const ExperimentConfig& cfg, const Outputs& out, json& summary,
                           std::ostream& log) {
  const ProblemSpec spec = pendulum_problem();
  const json& p = cfg.problem;
  const PrimalDual z0 = point_from(p, "z0", 2, 1);
  const int count = field<int>(p, "perturbations");
  const double radius = field<double>(p, "radius");
  if (count < 0 || !(radius >= 0.0)) throw ConfigError("pendulum-homotopy: bad perturbation setup");

  PrimalDual zmin(Vector(2), Vector(1));
  zmin.x << 0.0, -1.0;
  zmin.y << 0.5;
  PrimalDual zmax(Vector(2), Vector(1));
  zmax.x << 0.0, 1.0;
  zmax.y << -0.5;

  const SolveResult main = solve(spec, z0, cfg.driver);
  out.write_solve_log(main.log);
  json s = solve_summary(main, spec, cfg.driver.rho);
  s["final"] = flatten(main.z);
  s["error_to_minimum"] = z_norm(main.z - zmin, spec);
  summary["main"] = s;
  log << "main run: " << to_string(main.status) << ", error to minimum "
      << z_norm(main.z - zmin, spec) << "\n";
  bool ok = main.status == SolveStatus::solved;

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal;
  std::ostringstream csv;
  csv << "index,x1_0,x2_0,y_0,x1,x2,y,status,dist_min,dist_max\n" << std::setprecision(17);
  long to_min = 0;
  long to_max = 0;
  for (int k = 0; k < count; ++k) {
    Vector d(3);
    for (Index i = 0; i < 3; ++i) d[i] = normal(rng);
    d *= radius / d.norm();
    PrimalDual start(zmax.x + d.head(2), zmax.y + d.tail(1));
    const SolveResult r = solve(spec, start, cfg.driver);
    const double dmin = z_norm(r.z - zmin, spec);
    const double dmax = z_norm(r.z - zmax, spec);
    if (r.status == SolveStatus::solved && dmin <= 1e-8) ++to_min;
    if (dmax <= 1e-6) ++to_max;
    if (r.status != SolveStatus::solved) ok = false;
    csv << k << ',' << start.x[0] << ',' << start.x[1] << ',' << start.y[0] << ',' << r.z.x[0]
        << ',' << r.z.x[1] << ',' << r.z.y[0] << ',' << to_string(r.status) << ',' << dmin
        << ',' << dmax << '\n';
  }
  out.write("perturbations.csv", [&](std::ostream& os) { os << csv.str(); });
  summary["perturbations"] = {{"count", count}, {"to_minimum", to_min}, {"to_maximum", to_max}};
  log << count << " perturbed starts: " << to_min << " reached the minimum, " << to_max
      << " the maximum\n";
  return ok;
}

bool run_scalar_stability(const ExperimentConfig& cfg, const Outputs& out, json& summary,
                          std::ostream& log) {
  const ProblemSpec spec = scalar_problem();
  const json& p = cfg.problem;
  const PrimalDual z0 = point_from(p, "z0", 1, 1);
  FlowOptions options;
  options.h = field<double>(p, "h");
  options.t_final = field<double>(p, "t_final");
  std::ostringstream csv;
  csv << "rho,mu1_re,mu1_im,mu2_re,mu2_im,norm_initial,norm_final,stable\n"
      << std::setprecision(17);
  json rows = json::array();
  for (double rho : field<std::vector<double>>(p, "rhos")) {
    const auto [mu1, mu2] = linearized_spectrum_scalar(rho);
    options.rho = rho;
    options.sample_stride = std::max(1, static_cast<int>(options.t_final / options.h));
    double final_norm = kInfinity;
    try {
      const FlowTrajectory traj = integrate_flow(z0, spec, options);
      final_norm = z_norm(traj.states.back(), spec);
    } catch (const FlowDivergedError&) {
    }
    const double initial_norm = z_norm(z0, spec);
    const bool stable = final_norm < initial_norm;
    csv << rho << ',' << mu1.real() << ',' << mu1.imag() << ',' << mu2.real() << ','
        << mu2.imag() << ',' << initial_norm << ',' << final_norm << ',' << (stable ? 1 : 0)
        << '\n';
    rows.push_back({{"rho", rho}, {"norm_final", final_norm}, {"stable", stable}});
    log << "rho = " << rho << ": ||z(T)|| = " << final_norm << (stable ? " (decays)" : " (grows)")
        << "\n";
  }
  out.write("scalar_stability.csv", [&](std::ostream& os) { os << csv.str(); });
  summary["runs"] = rows;
  return true;
}

struct EllipticRun {
  SolveResult result;
  Index at_lower = 0;
  Index at_upper = 0;
};

EllipticRun solve_elliptic(const EllipticProblem& problem, const DriverParams& driver) {
  EllipticRun run;
  run.result = solve(problem.spec, PrimalDual::zero(problem.spec), driver);
  run.at_lower = problem.count_at_lower(run.result.z);
  run.at_upper = problem.count_at_upper(run.result.z);
  return run;
}

bool run_elliptic(const ExperimentConfig& cfg, const Outputs& out, json& summary,
                  std::ostream& log) {
  const json& p = cfg.problem;
  EllipticProblem problem;
  try {
    problem = elliptic_problem(EllipticConfig::standard(field<int>(p, "n"), field<double>(p, "p"),
                                                        field<double>(p, "gamma")));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const EllipticRun run = solve_elliptic(problem, cfg.driver);
  out.write_solve_log(run.result.log);
  out.write("elliptic_grid.csv",
            [&](std::ostream& os) { write_elliptic_grid_csv(os, problem, run.result.z); });
  json s = solve_summary(run.result, problem.spec, cfg.driver.rho);
  s["at_lower"] = run.at_lower;
  s["at_upper"] = run.at_upper;
  s["act"] = run.at_lower + run.at_upper;
  summary["solve"] = s;
  log << problem.spec.name << ": " << to_string(run.result.status) << ", #mat "
      << run.result.mat << ", #res " << run.result.res << ", #disc " << run.result.discarded
      << ", #act " << run.at_lower + run.at_upper << "\n";
  return run.result.status == SolveStatus::solved;
}

bool run_table1(const ExperimentConfig& cfg, const Outputs& out, json& summary,
                std::ostream& log) {
  const json& p = cfg.problem;
  struct Job {
    double p;
    int n;
    double gamma;
    EllipticRun run;
  };
  std::vector<Job> jobs;
  for (double pv : field<std::vector<double>>(p, "ps")) {
    for (int n : field<std::vector<int>>(p, "ns")) {
      for (double g : field<std::vector<double>>(p, "gammas")) {
        EllipticConfig ec = EllipticConfig::standard(n, pv, g);
        try {
          ec.validate();
        } catch (const std::invalid_argument& e) {
          throw ConfigError(e.what());
        }
        jobs.push_back({pv, n, g, {}});
      }
    }
  }
  int threads = field<int>(p, "threads");
  if (threads < 0) throw ConfigError("table1: threads must be nonnegative");
  if (threads == 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min<int>(threads, static_cast<int>(std::max<std::size_t>(1, jobs.size())));

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      Job& job = jobs[i];
      try {
        const EllipticProblem problem =
            elliptic_problem(EllipticConfig::standard(job.n, job.p, job.gamma));
        job.run = solve_elliptic(problem, cfg.driver);
        std::lock_guard<std::mutex> lock(log_mutex);
        log << "p = " << job.p << ", N = " << job.n << ", gamma = " << job.gamma << ": "
            << to_string(job.run.result.status) << ", #mat " << job.run.result.mat << "\n";
      } catch (...) {
        std::lock_guard<std::mutex> lock(log_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::ostringstream csv;
  csv << "log10_a,log10_b,N,gamma,act,disc,mat,res,status\n" << std::setprecision(17);
  json rows = json::array();
  bool ok = true;
  for (const Job& job : jobs) {
    const SolveResult& r = job.run.result;
    const Index act = job.run.at_lower + job.run.at_upper;
    csv << -job.p << ',' << job.p << ',' << job.n << ',' << job.gamma << ',' << act << ','
        << r.discarded << ',' << r.mat << ',' << r.res << ',' << to_string(r.status) << '\n';
    rows.push_back({{"p", job.p},
                    {"N", job.n},
                    {"gamma", job.gamma},
                    {"act", act},
                    {"at_lower", job.run.at_lower},
                    {"disc", r.discarded},
                    {"mat", r.mat},
                    {"res", r.res},
                    {"status", to_string(r.status)}});
    ok = ok && r.status == SolveStatus::solved;
  }
  out.write("table1.csv", [&](std::ostream& os) { os << csv.str(); });
  summary["rows"] = rows;
  summary["threads"] = threads;
  return ok;
}

bool run_random_qp(const ExperimentConfig& cfg, const Outputs& out, json& summary,
                   std::ostream& log) {
  const json& p = cfg.problem;
  ProblemSpec spec;
  try {
    spec = random_qp_problem(field<Index>(p, "n"), field<Index>(p, "m"), cfg.seed,
                             optional_number(p, "bound"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const SolveResult r = solve(spec, PrimalDual::zero(spec), cfg.driver);
  out.write_solve_log(r.log);
  summary["solve"] = solve_summary(r, spec, cfg.driver.rho);
  summary["solution"] = flatten(r.z);
  log << spec.name << ": " << to_string(r.status) << ", #mat " << r.mat << "\n";
  return r.status == SolveStatus::solved;
}

using Runner = bool (*)(const ExperimentConfig&, const Outputs&, json&, std::ostream&);

Runner runner_for(const std::string& name) {
  if (name == "pendulum-flow") return run_pendulum_flow;
  if (name == "pendulum-streamlines") return run_pendulum_streamlines;
  if (name == "pendulum-euler") return run_pendulum_euler;
  if (name == "pendulum-homotopy") return run_pendulum_homotopy;
  if (name == "scalar-stability") return run_scalar_stability;
  if (name == "elliptic") return run_elliptic;
  if (name == "table1") return run_table1;
  if (name == "random-qp") return run_random_qp;
  throw ConfigError("unknown experiment '" + name + "'");
}

}  // namespace

const std::vector<ExperimentInfo>& experiment_catalog() {
  static const std::vector<ExperimentInfo> catalog = build_catalog();
  return catalog;
}

const ExperimentInfo& find_experiment(const std::string& name) {
  for (const ExperimentInfo& info : experiment_catalog()) {
    if (info.name == name) return info;
  }
  throw ConfigError("unknown experiment '" + name + "' (see 'seqhom list')");
}

json driver_to_json(const DriverParams& d) {
  return {{"theta_cap", d.theta_cap},     {"lambda_term", d.lambda_term},
          {"lambda_inc", d.lambda_inc},   {"tol", d.tol},
          {"theta_ref", d.theta_ref},     {"k_p", d.k_p},
          {"k_i", d.k_i},                 {"lambda_min", d.lambda_min},
          {"lambda_init", d.lambda_init}, {"rho", d.rho},
          {"increment_floor", d.increment_floor},
          {"reset_integral", d.reset_integral},
          {"max_inner", d.max_inner},     {"max_outer", d.max_outer}};
}

DriverParams driver_from_json(const json& j, DriverParams base) {
  json merged = driver_to_json(base);
  merge_checked(merged, j, "driver");
  DriverParams d;
  d.theta_cap = field<double>(merged, "theta_cap");
  d.lambda_term = field<double>(merged, "lambda_term");
  d.lambda_inc = field<double>(merged, "lambda_inc");
  d.tol = field<double>(merged, "tol");
  d.theta_ref = field<double>(merged, "theta_ref");
  d.k_p = field<double>(merged, "k_p");
  d.k_i = field<double>(merged, "k_i");
  d.lambda_min = field<double>(merged, "lambda_min");
  d.lambda_init = field<double>(merged, "lambda_init");
  d.rho = field<double>(merged, "rho");
  d.increment_floor = field<double>(merged, "increment_floor");
  d.reset_integral = field<bool>(merged, "reset_integral");
  d.max_inner = field<int>(merged, "max_inner");
  d.max_outer = field<int>(merged, "max_outer");
  try {
    d.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return d;
}

json ExperimentConfig::to_json() const {
  return {{"experiment", experiment},
          {"seed", seed},
          {"out", out},
          {"driver", driver_to_json(driver)},
          {"problem", problem}};
}

ExperimentConfig resolve_config(const std::string& experiment,
                                const std::optional<json>& file,
                                const std::vector<std::string>& sets,
                                const std::optional<std::string>& out) {
  const ExperimentInfo& info = find_experiment(experiment);
  json merged{{"experiment", experiment},
              {"seed", 0},
              {"out", "out/" + experiment},
              {"driver", driver_to_json(info.driver_defaults)},
              {"problem", info.problem_defaults}};
  if (file) {
    if (file->contains("experiment") && (*file)["experiment"] != experiment) {
      throw ConfigError("configuration file is for experiment '" +
                        (*file)["experiment"].dump() + "', not '" + experiment + "'");
    }
    merge_checked(merged, *file, "");
  }
  for (const std::string& assignment : sets) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set expects key=value, got '" + assignment + "'");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    json overlay = value;
    std::string rest = key;
    std::vector<std::string> parts;
    for (std::size_t pos; (pos = rest.find('.')) != std::string::npos;) {
      parts.push_back(rest.substr(0, pos));
      rest = rest.substr(pos + 1);
    }
    parts.push_back(rest);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) overlay = json{{*it, overlay}};
    merge_checked(merged, overlay, "");
  }
  if (out) merged["out"] = *out;
  if (merged["experiment"] != experiment) throw ConfigError("experiment name cannot be overridden");

  ExperimentConfig cfg;
  cfg.experiment = experiment;
  cfg.seed = field<std::uint64_t>(merged, "seed");
  cfg.out = field<std::string>(merged, "out");
  cfg.driver = driver_from_json(merged["driver"], info.driver_defaults);
  cfg.problem = merged["problem"];
  return cfg;
}

int run_experiment(const ExperimentConfig& config, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  const Runner runner = runner_for(config.experiment);
  const Outputs out(config.out);
  out.write("resolved_config.json",
            [&](std::ostream& os) { os << config.to_json().dump(2) << '\n'; });

  json summary{{"experiment", config.experiment}};
  int code = kExitOk;
  try {
    const bool converged = runner(config, out, summary, log);
    code = converged ? kExitOk : kExitNonconvergence;
  } catch (const ConfigError& e) {
    log << "configuration error: " << e.what() << "\n";
    summary["error"] = e.what();
    code = kExitConfigError;
  } catch (const std::invalid_argument& e) {
    log << "invalid parameter: " << e.what() << "\n";
    summary["error"] = e.what();
    code = kExitConfigError;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    summary["error"] = e.what();
    code = kExitFailure;
  }
  summary["exit_code"] = code;
  summary["wall_time_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.write("summary.json", [&](std::ostream& os) { os << summary.dump(2) << '\n'; });
  return code;
}

void list_experiments(std::ostream& os) {
  for (const ExperimentInfo& info : experiment_catalog()) {
    os << info.name << "\n    " << info.description << "\n    defaults: "
       << info.problem_defaults.dump() << "\n";
  }
}

int run_self_check(std::ostream& os) {
  struct Case {
    ProblemSpec spec;
    Vector x;
  };
  std::vector<Case> cases;
  {
    Vector x(2);
    x << 0.3, 0.4;
    cases.push_back({pendulum_problem(), x});
  }
  cases.push_back({scalar_problem(), Vector::Constant(1, 0.7)});
  {
    Vector x(2);
    x << 0.4, 0.8;
    cases.push_back({nonconvex_qp_problem(), x});
  }
  cases.push_back({random_qp_problem(8, 3, 7, 2.0), Vector::LinSpaced(8, -0.5, 0.5)});
  {
    const EllipticProblem e = elliptic_problem(EllipticConfig::standard(4, 1.0, 1e-2));
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unif(-0.4, 0.4);
    Vector x(e.spec.n_x);
    for (Index i = 0; i < x.size(); ++i) x[i] = unif(rng);
    cases.push_back({e.spec, x});
  }
  bool ok = true;
  os << std::setprecision(3);
  for (const Case& c : cases) {
    Vector yt = Vector::LinSpaced(c.spec.n_y, 0.5, 1.5);
    const DerivativeReport d = check_derivatives(c.spec, c.x, 1e-5, yt);
    const double adj = check_adjoint_consistency(c.spec, c.x, 100, 3);
    const double gx = check_gram_roundtrip(c.spec.metric_x, 20, 5);
    const double gy = check_gram_roundtrip(c.spec.metric_y, 20, 5);
    const bool pass = d.max() <= 1e-5 && adj <= 1e-8 && gx <= 1e-10 && gy <= 1e-10;
    ok = ok && pass;
    os << (pass ? "PASS " : "FAIL ") << c.spec.name << ": derivatives " << d.max()
       << ", adjoint " << adj << ", gram " << std::max(gx, gy) << "\n";
  }
  return ok ? kExitOk : kExitFailure;
}

}  // namespace seqhom
