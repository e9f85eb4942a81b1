#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tsfem/harness.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace tsfem;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tsfem_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("config parsing") {
  const RunConfig c = parse(R"(
[problem]
id = isaacs-2x2
[mesh]
n = 4, 8 16
[eps]
C = 0.5
gamma = 0.25
delta = 0
[rule]
kind = polar
n_r = 4
n_t = 12
[solver]
tol = 1e-11
inexact = true
init = zero
[study]
reference_n = 64
function = quadratic
ring_samples = 128
[output]
dir = results
seed = 42
record_time = yes
)");
  CHECK(c.problem == "isaacs-2x2");
  CHECK(c.n == std::vector<int>{4, 8, 16});
  CHECK(c.eps.C == 0.5);
  CHECK(c.eps.gamma == 0.25);
  CHECK(c.eps.delta == 0.0);
  CHECK(c.rule.kind == "polar");
  CHECK(c.rule.n_r == 4);
  CHECK(c.rule.n_t == 12);
  CHECK(c.solver.tol_F == 1e-11);
  CHECK(c.solver.inexact);
  CHECK(c.solver.init == InitMode::zero);
  CHECK(c.reference_n == 64);
  CHECK(c.consistency_function == "quadratic");
  CHECK(c.ring_samples == 128);
  CHECK(c.out_dir == "results");
  CHECK(c.seed == 42u);
  CHECK(c.record_time);
}

TEST_CASE("config defaults") {
  const RunConfig c = parse("");
  CHECK(c.problem == "laplace-sine");
  CHECK(c.eps.C == 1.0);
  CHECK(c.eps.gamma == 0.5);
  CHECK(c.eps.delta == 1.0);
  CHECK(c.rule.kind == "axis");
  CHECK(c.rule.radius == 0.5);
  CHECK(c.rule.p == 3.0);
  CHECK_FALSE(c.record_time);
}

TEST_CASE("invalid configs are rejected") {
  CHECK_THROWS_AS(parse("[nonsense]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[mesh]\nsize = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse("[mesh]\nn = four\n"), ConfigError);
  CHECK_THROWS_AS(parse("[mesh]\nn = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[eps]\nC = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[rule]\nkind = hexagon\n"), ConfigError);
  CHECK_THROWS_AS(parse("[solver]\ninit = random\n"), ConfigError);
  CHECK_THROWS_AS(parse("[solver]\ninexact = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse("[study]\nring_samples = 32\n"), ConfigError);
  CHECK_THROWS_AS(parse("n = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse("[mesh\nn = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse("[problem]\nA00 = 1 0 0\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/tsfem.ini"), ConfigError);
}

TEST_CASE("custom problems") {
  RunConfig c = parse(R"(
[problem]
id = custom
controls_a = 2
controls_b = 1
source = -1.5
A00 = 1 0 0 3
A10 = 2 0.5 0.5 2
[mesh]
x0 = 0
x1 = 2
)");
  const ControlProblem p = make_problem(c);
  CHECK(p.controls_a == 2);
  CHECK(p.A(1, 0)({0.3, 0.3})(0, 1) == 0.5);
  CHECK(p.source({1.0, 0.5}) == -1.5);
  CHECK(p.domain.x1 == 2.0);

  c.custom.coeff.erase(10);
  CHECK_THROWS_AS(make_problem(c), ConfigError);

  RunConfig shifted;
  shifted.domain.x1 = 2.0;
  CHECK_THROWS_AS(make_problem(shifted), ConfigError);
}

TEST_CASE("registry") {
  for (const std::string& id : registry_ids()) {
    if (id == "custom") continue;
    ControlProblem p = make_problem(id);
    CHECK(p.id == id);
    const auto [lo, hi] = ellipticity_bounds(p, sample_points(build_structured_mesh(6)));
    CHECK(lo > 0.0);
    CHECK(hi >= lo);
  }
  CHECK_THROWS_AS(make_problem("unknown"), ConfigError);

  ControlProblem iso = make_problem("isaacs-2x2");
  CHECK(iso.controls_a * iso.controls_b == 4);
  for (const MatrixField& a : iso.coeff) {
    Eigen::SelfAdjointEigenSolver<Matrix2> eig(a({0.5, 0.5}));
    CHECK(eig.eigenvalues()[0] == doctest::Approx(1.0));
    CHECK(eig.eigenvalues()[1] == doctest::Approx(2.0));
  }
}

TEST_CASE("laplace-sine data are consistent") {
  const ControlProblem p = make_problem("laplace-sine");
  REQUIRE(p.exact.has_value());
  const double d = 1e-4;
  for (const Vector2& x : {Vector2(0.3, 0.7), Vector2(0.55, 0.1)}) {
    const auto& u = *p.exact;
    const double lap = (u(x + Vector2(d, 0)) + u(x - Vector2(d, 0)) + u(x + Vector2(0, d)) + u(x - Vector2(0, d)) -
                        4.0 * u(x)) /
                       (d * d);
    CHECK(lap == doctest::Approx(p.source(x)).epsilon(1e-6));
    const Vector2 g((u(x + Vector2(d, 0)) - u(x - Vector2(d, 0))) / (2 * d),
                    (u(x + Vector2(0, d)) - u(x - Vector2(0, d))) / (2 * d));
    CHECK((u.gradient(x) - g).norm() <= 1e-6);
  }
}

TEST_CASE("random loads are reproducible") {
  const Eigen::VectorXd a = random_loads(7, 16, 225), b = random_loads(7, 16, 225);
  CHECK(a == b);
  CHECK(a.minCoeff() >= -1.0);
  CHECK(a.maxCoeff() < 1.0);
  CHECK(a != random_loads(8, 16, 225));
  CHECK(a.head(10) != random_loads(7, 32, 225).head(10));
  CHECK(std::abs(a.mean()) < 0.2);
}

TEST_CASE("solve writes its files and converges") {
  RunConfig c;
  c.problem = "isaacs-2x2";
  c.n = {8};
  c.out_dir = scratch("solve");
  std::ostringstream out, err;
  REQUIRE(run_command("solve", c, out, err) == kSuccess);
  const std::string report = slurp(c.out_dir / "report.csv");
  CHECK(report.rfind("iteration,residual,monotonicity_gap,inner_solves\n", 0) == 0);
  CHECK(slurp(c.out_dir / "solution.dat").find("# id x y value") != std::string::npos);
}

TEST_CASE("studies are byte-for-byte deterministic") {
  RunConfig c;
  c.problem = "laplace-sine";
  c.n = {4, 8};
  c.out_dir = scratch("study1");
  std::ostringstream out, err;
  REQUIRE(run_command("study", c, out, err) == kSuccess);
  const std::string first = slurp(c.out_dir / "convergence.csv");
  c.out_dir = scratch("study2");
  REQUIRE(run_command("study", c, out, err) == kSuccess);
  CHECK(slurp(c.out_dir / "convergence.csv") == first);
  CHECK(first.rfind("n,h,eps,error_max,order,iters,residual,seconds\n", 0) == 0);
  // timing is left out unless requested
  std::istringstream lines(first);
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) CHECK(line.back() == ',');

  c.problem = "hjb-two";
  c.n = {4};
  c.seed = 5;
  c.out_dir = scratch("abp1");
  REQUIRE(run_command("abp", c, out, err) == kSuccess);
  const std::string abp = slurp(c.out_dir / "abp.csv");
  c.out_dir = scratch("abp2");
  REQUIRE(run_command("abp", c, out, err) == kSuccess);
  CHECK(slurp(c.out_dir / "abp.csv") == abp);
}

TEST_CASE("study rows") {
  RunConfig c;
  c.n = {4, 8};
  const auto rows = run_convergence_study(c);
  REQUIRE(rows.size() == 2);
  CHECK_FALSE(rows[0].order.has_value());
  REQUIRE(rows[1].order.has_value());
  CHECK(*rows[1].order == doctest::Approx(std::log(rows[0].error_max / rows[1].error_max) / std::log(2.0)));
  CHECK(rows[1].h == doctest::Approx(std::sqrt(2.0) / 8));
  CHECK(rows[1].eps == doctest::Approx(c.eps(rows[1].h)));

  RunConfig ref;
  ref.problem = "hjb-two";
  ref.n = {4};
  ref.reference_n = 8;
  CHECK_THROWS_AS(run_convergence_study(ref), ConfigError);
}

TEST_CASE("exit codes") {
  std::ostringstream out, err;
  RunConfig c;
  c.out_dir = scratch("codes");
  CHECK(run_command("frobnicate", c, out, err) == kConfigError);
  c.problem = "nope";
  CHECK(run_command("solve", c, out, err) == kConfigError);
  c.problem = "isaacs-2x2";
  c.n = {8};
  c.solver.max_outer = 1;
  c.solver.tol_F = 1e-300;
  CHECK(run_command("solve", c, out, err) == kNonConvergence);
  CHECK(run_cli("solve", "/nonexistent.ini", std::nullopt, std::nullopt, out, err) == kConfigError);
  RunConfig info;
  info.n = {4};
  std::ostringstream listing;
  CHECK(run_command("mesh-info", info, listing, err) == kSuccess);
  CHECK(listing.str().find("25 nodes (9 interior), 32 cells") != std::string::npos);
}

TEST_CASE("worker count from the environment") {
  ::unsetenv("TSFEM_WORKERS");
  CHECK(worker_count() == 1);
  ::setenv("TSFEM_WORKERS", "3", 1);
  CHECK(worker_count() == 3);
  ::setenv("TSFEM_WORKERS", "zero", 1);
  CHECK_THROWS_AS(worker_count(), ConfigError);
  ::unsetenv("TSFEM_WORKERS");
}
