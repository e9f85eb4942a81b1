#include "tsfem/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace tsfem {

namespace {

using std::numbers::pi;

Matrix2 mat(double a11, double a12, double a21, double a22) {
  Matrix2 m;
  m << a11, a12, a21, a22;
  return m;
}

ControlProblem builtin(const std::string& id) {
  ControlProblem p;
  p.id = id;
  p.domain = Rect{};
  if (id == "laplace-sine") {
    p.coeff = {MatrixField::constant(Matrix2::Identity())};
    p.source = ScalarField::function("-2 pi^2 sin(pi x) sin(pi y)", [](const Vector2& x) {
      return -2.0 * pi * pi * std::sin(pi * x.x()) * std::sin(pi * x.y());
    });
    p.exact = SmoothFunction{
        [](const Vector2& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); },
        [](const Vector2& x) {
          return Vector2(pi * std::cos(pi * x.x()) * std::sin(pi * x.y()), pi * std::sin(pi * x.x()) * std::cos(pi * x.y()));
        }};
  } else if (id == "hjb-two") {
    p.controls_a = 2;
    p.coeff = {MatrixField::constant(mat(1, 0, 0, 2)), MatrixField::constant(mat(2, 0, 0, 1))};
    p.source = ScalarField::constant(1.0);
  } else if (id == "isaacs-2x2") {
    // A^{ab} = R_b A_a R_b^T, A_0 = diag(1,2), A_1 = diag(2,1), R_1 rotation by pi/4
    p.controls_a = 2;
    p.controls_b = 2;
    const Eigen::Rotation2Dd rot(pi / 4.0);
    const Matrix2 r = rot.toRotationMatrix();
    const Matrix2 a0 = mat(1, 0, 0, 2), a1 = mat(2, 0, 0, 1);
    p.coeff = {MatrixField::constant(a0), MatrixField::constant(r * a0 * r.transpose()), MatrixField::constant(a1),
               MatrixField::constant(r * a1 * r.transpose())};
    p.source = ScalarField::function("2 sin(2 pi x) cos(2 pi y)", [](const Vector2& x) {
      return 2.0 * std::sin(2.0 * pi * x.x()) * std::cos(2.0 * pi * x.y());
    });
  } else if (id == "constant-f") {
    p.coeff = {MatrixField::constant(Matrix2::Identity())};
    p.source = ScalarField::constant(1.0);
  } else if (id == "variable-aniso") {
    p.controls_a = 2;
    p.coeff = {
        MatrixField::function("[[1+x, 1/4], [1/4, 1+y]]",
                              [](const Vector2& x) { return mat(1.0 + x.x(), 0.25, 0.25, 1.0 + x.y()); }, 1.0),
        MatrixField::function("diag(2-x, 1+xy)",
                              [](const Vector2& x) { return mat(2.0 - x.x(), 0.0, 0.0, 1.0 + x.x() * x.y()); },
                              std::sqrt(2.0))};
    p.source = ScalarField::constant(1.0);
  } else {
    throw ConfigError("unknown problem id '" + id + "'");
  }
  return p;
}

ControlProblem custom_problem(const RunConfig& config) {
  const CustomProblemConfig& c = config.custom;
  ControlProblem p;
  p.id = "custom";
  p.controls_a = c.controls_a;
  p.controls_b = c.controls_b;
  p.domain = config.domain;
  for (int a = 0; a < c.controls_a; ++a)
    for (int b = 0; b < c.controls_b; ++b) {
      const auto it = c.coeff.find(a * 10 + b);
      if (it == c.coeff.end())
        throw ConfigError("custom problem is missing problem.A" + std::to_string(a) + std::to_string(b));
      const auto& v = it->second;
      const Matrix2 m = mat(v[0], v[1], v[2], v[3]);
      if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-14 * (1.0 + m.cwiseAbs().maxCoeff()))
        throw ConfigError("problem.A" + std::to_string(a) + std::to_string(b) + " is not symmetric");
      p.coeff.push_back(MatrixField::constant(m));
    }
  for (const auto& [key, value] : c.coeff)
    if (key / 10 >= c.controls_a || key % 10 >= c.controls_b)
      throw ConfigError("problem.A" + std::to_string(key / 10) + std::to_string(key % 10) + " is outside the control sets");
  p.source = ScalarField::constant(c.source);
  return p;
}

template <typename F>
void parallel_for(std::size_t count, F&& body) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i; (i = next++) < count;) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::optional<double> empirical_order(double e_coarse, double e_fine, double h_coarse, double h_fine) {
  if (!(e_coarse > 0.0) || !(e_fine > 0.0)) return std::nullopt;
  return std::log(e_coarse / e_fine) / std::log(h_coarse / h_fine);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

struct Reference {
  std::unique_ptr<Discretization> disc;
  FeFunction solution;
};

std::string reference_key(const RunConfig& c, int n_ref) {
  std::ostringstream key;
  key.precision(17);
  key << c.problem << '|' << n_ref << '|' << c.eps.C << ',' << c.eps.gamma << ',' << c.eps.delta << '|' << c.rule.kind
      << ',' << c.rule.p << ',' << c.rule.radius << ',' << c.rule.n_r << ',' << c.rule.n_t << '|' << c.solver.tol_F;
  if (c.problem == "custom") {
    key << '|' << c.custom.controls_a << ',' << c.custom.controls_b << ',' << c.custom.source;
    for (const auto& [k, v] : c.custom.coeff) key << ',' << k << ':' << v[0] << ' ' << v[1] << ' ' << v[2] << ' ' << v[3];
    key << '|' << c.domain.x0 << ',' << c.domain.y0 << ',' << c.domain.x1 << ',' << c.domain.y1;
  }
  return key.str();
}

// Reference solutions are reused across studies within one process.
std::shared_ptr<const Reference> reference_solution(const RunConfig& config, int n_ref) {
  static std::mutex mutex;
  static std::map<std::string, std::shared_ptr<const Reference>> cache;
  const std::string key = reference_key(config, n_ref);
  std::lock_guard lock(mutex);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  auto disc = std::make_unique<Discretization>(config, n_ref);
  SolveReport report = howard_minmax(disc->ctx(), disc->loads(), config.solver);
  auto ref = std::make_shared<const Reference>(Reference{std::move(disc), std::move(report.solution)});
  cache.emplace(key, ref);
  return ref;
}

SmoothFunction consistency_function(const std::string& name) {
  if (name == "quadratic") {
    // (1/2) x^T H x with H = [[2, 1/2], [1/2, 1]]
    return {[](const Vector2& x) { return x.x() * x.x() + 0.5 * x.x() * x.y() + 0.5 * x.y() * x.y(); },
            [](const Vector2& x) { return Vector2(2.0 * x.x() + 0.5 * x.y(), 0.5 * x.x() + x.y()); }};
  }
  return {[](const Vector2& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); },
          [](const Vector2& x) {
            return Vector2(pi * std::cos(pi * x.x()) * std::sin(pi * x.y()), pi * std::sin(pi * x.x()) * std::cos(pi * x.y()));
          }};
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << content;
}

}  // namespace

std::vector<std::string> registry_ids() {
  return {"laplace-sine", "hjb-two", "isaacs-2x2", "constant-f", "variable-aniso", "custom"};
}

ControlProblem make_problem(const std::string& id) {
  if (id == "custom") throw ConfigError("the custom problem needs a config");
  return builtin(id);
}

ControlProblem make_problem(const RunConfig& config) {
  if (config.problem == "custom") return custom_problem(config);
  const Rect unit;
  if (config.domain.x0 != unit.x0 || config.domain.y0 != unit.y0 || config.domain.x1 != unit.x1 ||
      config.domain.y1 != unit.y1)
    throw ConfigError("built-in problems are posed on the unit square; use problem.id = custom for other domains");
  return builtin(config.problem);
}

BallQuadrature make_rule(const RuleConfig& rule) {
  const Kernel kernel(rule.p);
  if (rule.kind == "axis") return build_axis_rule(kernel, rule.radius);
  if (rule.kind == "polar") return build_polar_rule(kernel, rule.n_r, rule.n_t);
  throw ConfigError("unknown quadrature rule '" + rule.kind + "'");
}

Discretization::Discretization(ControlProblem problem, int n, const EpsSchedule& eps, const RuleConfig& rule,
                               ContextOptions options)
    : n_(n), problem_(std::move(problem)), mesh_(build_structured_mesh(n, problem_.domain)) {
  ellipticity_bounds(problem_, sample_points(mesh_));
  ctx_ = std::make_unique<OperatorContext>(mesh_, problem_, make_rule(rule), eps(mesh_.h()), options);
  const ScalarField& f = problem_.source;
  loads_ = load_coefficients(mesh_, ctx_->volumes(), [&f](const Vector2& x) { return f(x); });
}

Discretization::Discretization(const RunConfig& config, int n)
    : Discretization(make_problem(config), n, config.eps, config.rule, ContextOptions{config.allow_non_acute}) {}

void Discretization::set_loads(Eigen::VectorXd loads) {
  if (loads.size() != mesh_.num_interior()) throw std::invalid_argument("load vector size does not match the mesh");
  loads_ = std::move(loads);
}

Eigen::VectorXd random_loads(std::uint64_t seed, int n, Index count) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(n)};
  std::mt19937_64 gen(seq);
  Eigen::VectorXd f(count);
  // 53 high bits to [0, 1), independent of the library's distributions
  for (Index i = 0; i < count; ++i) f[i] = 2.0 * std::ldexp(static_cast<double>(gen() >> 11), -53) - 1.0;
  return f;
}

SolveRun run_solve(const RunConfig& config) {
  auto disc = std::make_unique<Discretization>(config, config.n.front());
  SolveReport report = howard_minmax(disc->ctx(), disc->loads(), config.solver);
  return {std::move(disc), std::move(report)};
}

std::vector<StudyRow> run_convergence_study(const RunConfig& config) {
  const ControlProblem probe = make_problem(config);
  std::shared_ptr<const Reference> ref;
  if (!probe.exact) {
    const int n_max = *std::max_element(config.n.begin(), config.n.end());
    const int n_ref = config.reference_n > 0 ? config.reference_n : 4 * n_max;
    if (n_ref < 4 * n_max) throw ConfigError("study.reference_n must be at least 4 times the largest n");
    ref = reference_solution(config, n_ref);
  }

  std::vector<StudyRow> rows(config.n.size());
  parallel_for(rows.size(), [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    const Discretization disc(config, config.n[i]);
    const SolveReport report = howard_minmax(disc.ctx(), disc.loads(), config.solver);
    StudyRow& row = rows[i];
    row.n = config.n[i];
    row.h = disc.mesh().h();
    row.eps = disc.ctx().eps();
    row.iters = report.outer_iterations;
    row.residual = report.residuals.back();
    for (Index z = 0; z < disc.mesh().num_nodes(); ++z) {
      const Vector2 x = disc.mesh().vertex(z);
      const double target = probe.exact ? (*probe.exact)(x) : ref->solution(x);
      row.error_max = std::max(row.error_max, std::abs(report.solution[z] - target));
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });
  for (std::size_t i = 1; i < rows.size(); ++i)
    rows[i].order = empirical_order(rows[i - 1].error_max, rows[i].error_max, rows[i - 1].h, rows[i].h);
  return rows;
}

std::vector<ConsistencyRow> run_consistency_study(const RunConfig& config) {
  const SmoothFunction w = consistency_function(config.consistency_function);
  std::vector<ConsistencyRow> rows(config.n.size());
  parallel_for(rows.size(), [&](std::size_t i) {
    const Discretization disc(config, config.n[i]);
    rows[i] = {config.n[i], disc.mesh().h(), disc.ctx().eps(), measure_consistency(disc.ctx(), w).max_abs, {}};
  });
  for (std::size_t i = 1; i < rows.size(); ++i)
    rows[i].order = empirical_order(rows[i - 1].max_abs, rows[i].max_abs, rows[i - 1].h, rows[i].h);
  return rows;
}

std::vector<AbpRow> run_abp_study(const RunConfig& config) {
  std::vector<AbpRow> rows(config.n.size());
  EnvelopeOptions options;
  options.ring_samples = config.ring_samples;
  parallel_for(rows.size(), [&](std::size_t i) {
    Discretization disc(config, config.n[i]);
    disc.set_loads(random_loads(config.seed, config.n[i], disc.mesh().num_interior()));
    const SolveReport report = howard_minmax(disc.ctx(), disc.loads(), config.solver);
    AbpRow& row = rows[i];
    row.n = config.n[i];
    row.h = disc.mesh().h();
    row.eps = disc.ctx().eps();
    row.abp = abp_ratio(report.solution, disc.loads(), options);
    row.iters = report.outer_iterations;
    row.residual = report.residuals.back();
  });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double prev = rows[i - 1].abp.ratio, cur = rows[i].abp.ratio;
    if (prev > 0.0 && std::isfinite(prev) && std::isfinite(cur)) rows[i].growth = cur / prev;
  }
  return rows;
}

void write_report_csv(std::ostream& os, const SolveReport& report) {
  os << "iteration,residual,monotonicity_gap,inner_solves\n";
  for (std::size_t k = 0; k < report.residuals.size(); ++k) {
    os << k << ',' << fmt(report.residuals[k]) << ',';
    if (k > 0) os << fmt(report.monotonicity_gaps[k - 1]);
    os << ',' << report.inner_solves[k] << '\n';
  }
}

void write_study_csv(std::ostream& os, const std::vector<StudyRow>& rows, bool record_time) {
  os << "n,h,eps,error_max,order,iters,residual,seconds\n";
  for (const StudyRow& r : rows)
    os << r.n << ',' << fmt(r.h) << ',' << fmt(r.eps) << ',' << fmt(r.error_max) << ',' << fmt(r.order) << ','
       << r.iters << ',' << fmt(r.residual) << ',' << (record_time ? fmt(r.seconds) : std::string()) << '\n';
}

void write_study_dat(std::ostream& os, const std::vector<StudyRow>& rows) {
  os << "# h error_max\n";
  for (const StudyRow& r : rows) os << fmt(r.h) << ' ' << fmt(r.error_max) << '\n';
}

void write_consistency_csv(std::ostream& os, const std::vector<ConsistencyRow>& rows) {
  os << "n,h,eps,consistency_max,order\n";
  for (const ConsistencyRow& r : rows)
    os << r.n << ',' << fmt(r.h) << ',' << fmt(r.eps) << ',' << fmt(r.max_abs) << ',' << fmt(r.order) << '\n';
}

void write_abp_csv(std::ostream& os, const std::vector<AbpRow>& rows) {
  os << "n,h,eps,sup_neg,rhs,ratio,growth,contact,iters,residual\n";
  for (const AbpRow& r : rows) {
    const std::string ratio = std::isinf(r.abp.ratio) ? std::string("inf") : fmt(r.abp.ratio);
    os << r.n << ',' << fmt(r.h) << ',' << fmt(r.eps) << ',' << fmt(r.abp.sup_neg) << ',' << fmt(r.abp.rhs) << ','
       << ratio << ',' << fmt(r.growth) << ',' << r.abp.contact.size() << ',' << r.iters << ',' << fmt(r.residual)
       << '\n';
  }
}

int worker_count() {
  const char* env = std::getenv("TSFEM_WORKERS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError("TSFEM_WORKERS must be a positive integer");
  return static_cast<int>(std::min(v, 256L));
}

int run_command(const std::string& command, const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    const auto& dir = config.out_dir;
    if (command == "solve") {
      std::filesystem::create_directories(dir);
      const SolveRun run = run_solve(config);
      const SolveReport& report = run.report;
      std::ostringstream sol, csv;
      write_fe_function(sol, report.solution);
      write_report_csv(csv, report);
      write_file(dir / "solution.dat", sol.str());
      write_file(dir / "report.csv", csv.str());
      out << "problem " << config.problem << ", n = " << config.n.front() << ": " << report.outer_iterations
          << " outer iterations, " << report.inner.linear_solves << " linear solves, residual "
          << fmt(report.residuals.back()) << " (tol " << fmt(report.tol_F) << ")\n";
    } else if (command == "study") {
      std::filesystem::create_directories(dir);
      const auto rows = run_convergence_study(config);
      std::ostringstream csv, dat;
      write_study_csv(csv, rows, config.record_time);
      write_study_dat(dat, rows);
      write_file(dir / "convergence.csv", csv.str());
      write_file(dir / "convergence.dat", dat.str());
      out << csv.str();
    } else if (command == "consistency") {
      std::filesystem::create_directories(dir);
      std::ostringstream csv;
      write_consistency_csv(csv, run_consistency_study(config));
      write_file(dir / "consistency.csv", csv.str());
      out << csv.str();
    } else if (command == "abp") {
      std::filesystem::create_directories(dir);
      std::ostringstream csv;
      const auto rows = run_abp_study(config);
      write_abp_csv(csv, rows);
      write_file(dir / "abp.csv", csv.str());
      for (const AbpRow& r : rows)
        out << "n = " << r.n << ": sup v- = " << fmt(r.abp.sup_neg) << ", rhs = " << fmt(r.abp.rhs)
            << ", ratio = " << (std::isinf(r.abp.ratio) ? std::string("inf") : fmt(r.abp.ratio))
            << ", contact nodes = " << r.abp.contact.size() << '\n';
    } else if (command == "mesh-info") {
      for (int n : config.n) {
        const Discretization disc(config, n);
        const Mesh& m = disc.mesh();
        out << "n = " << n << ": " << m.num_nodes() << " nodes (" << m.num_interior() << " interior), "
            << m.num_cells() << " cells, h = " << fmt(m.h()) << ", weakly acute = " << (m.weakly_acute() ? "yes" : "no")
            << ", eps = " << fmt(disc.ctx().eps()) << ", rule = " << disc.ctx().rule().kind << " ("
            << disc.ctx().rule().size() << " points), lambda = " << fmt(disc.problem().lambda)
            << ", Lambda = " << fmt(disc.problem().Lambda) << ", |M| max = " << fmt(disc.ctx().q_eff())
            << ", sqrt(2/lambda) = " << fmt(disc.ctx().q_paper()) << '\n';
      }
    } else {
      throw ConfigError("unknown command '" + command + "'");
    }
    return kSuccess;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const EllipticityError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ConvergenceError& e) {
    err << "solver did not converge: " << e.what() << '\n';
    if (!e.history().empty()) err << "last residual: " << fmt(e.history().back()) << '\n';
    return kNonConvergence;
  } catch (const InvariantViolation& e) {
    err << "invariant violation: " << e.what() << '\n';
    return kInvariantViolation;
  } catch (const LinearSolveError& e) {
    err << "invariant violation: " << e.what() << '\n';
    return kInvariantViolation;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int run_cli(const std::string& command, const std::string& config_path, const std::optional<std::string>& out_dir,
            const std::optional<std::uint64_t>& seed, std::ostream& out, std::ostream& err) {
  RunConfig config;
  try {
    if (!config_path.empty()) config = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  if (out_dir) config.out_dir = *out_dir;
  if (seed) config.seed = *seed;
  return run_command(command, config, out, err);
}

}  // namespace tsfem
