#pragma once

#include "tsfem/mesh.hpp"
#include "tsfem/nonlocal.hpp"
#include "tsfem/solver.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsfem {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RuleConfig {
  std::string kind = "axis";  ///< axis | polar
  double p = 3.0;             ///< kernel exponent
  double radius = 0.5;        ///< axis rule node radius
  int n_r = 3;                ///< polar rule radial nodes
  int n_t = 8;                ///< polar rule angles
};

/// Constant-coefficient problem given entirely in the config file.
struct CustomProblemConfig {
  int controls_a = 1;
  int controls_b = 1;
  /// Row-major 2x2 entries per control pair, key a * controls_b + b.
  std::map<int, std::array<double, 4>> coeff;
  double source = 1.0;
};

struct RunConfig {
  std::string problem = "laplace-sine";
  CustomProblemConfig custom;
  std::vector<int> n = {16};
  Rect domain;
  EpsSchedule eps;
  RuleConfig rule;
  HowardConfig solver;
  /// Reference mesh for self-convergence; 0 selects 4 * max n.
  int reference_n = 0;
  /// Test function for the consistency study: sine | quadratic.
  std::string consistency_function = "sine";
  int ring_samples = 64;
  bool allow_non_acute = false;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 0;
  /// Fill the `seconds` CSV column. Off by default so that repeated runs
  /// produce identical files.
  bool record_time = false;
};

/// Parse INI text. Unknown sections or keys and malformed values raise
/// ConfigError naming the offending key.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace tsfem
