#include "tsfem/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace tsfem {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"problem", {"id", "controls_a", "controls_b", "source"}},
      {"mesh", {"n", "x0", "y0", "x1", "y1", "allow_non_acute"}},
      {"eps", {"C", "gamma", "delta"}},
      {"kernel", {"p"}},
      {"rule", {"kind", "r", "n_r", "n_t"}},
      {"solver", {"tol", "inner_tol", "max_outer", "max_inner", "inexact", "eta0", "init"}},
      {"study", {"reference_n", "function", "ring_samples"}},
      {"output", {"dir", "seed", "record_time"}},
  };
  return s;
}

// Custom coefficient keys A<a><b>, e.g. A01.
bool coefficient_key(const std::string& key, int& a, int& b) {
  if (key.size() != 3 || key[0] != 'A' || !std::isdigit(key[1]) || !std::isdigit(key[2])) return false;
  a = key[1] - '0';
  b = key[2] - '0';
  return true;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError("invalid value '" + text + "' for key " + key);
  return value;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::string t = text;
  std::replace(t.begin(), t.end(), ',', ' ');
  std::istringstream is(t);
  std::vector<T> values;
  for (std::string item; is >> item;) values.push_back(parse_number<T>(key, item));
  if (values.empty()) throw ConfigError("empty list for key " + key);
  return values;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("invalid boolean '" + text + "' for key " + key);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

RunConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  RunConfig cfg;
  for (const auto& [section, entries] : tree) {
    const auto allowed = schema().find(section);
    if (allowed == schema().end()) {
      if (entries.empty() && !entries.data().empty()) throw ConfigError("key outside any section: " + section);
      throw ConfigError("unknown section [" + section + "]");
    }
    for (const auto& [key, node] : entries) {
      const std::string full = section + "." + key;
      const std::string value = node.data();
      int a = 0, b = 0;
      if (section == "problem" && coefficient_key(key, a, b)) {
        const auto v = parse_list<double>(full, value);
        require(v.size() == 4, full + " needs four numbers (row-major 2x2)");
        cfg.custom.coeff[a * 10 + b] = {v[0], v[1], v[2], v[3]};
        continue;
      }
      if (!allowed->second.count(key)) throw ConfigError("unknown key " + full);

      if (full == "problem.id") cfg.problem = trim(value);
      else if (full == "problem.controls_a") cfg.custom.controls_a = parse_number<int>(full, value);
      else if (full == "problem.controls_b") cfg.custom.controls_b = parse_number<int>(full, value);
      else if (full == "problem.source") cfg.custom.source = parse_number<double>(full, value);
      else if (full == "mesh.n") cfg.n = parse_list<int>(full, value);
      else if (full == "mesh.x0") cfg.domain.x0 = parse_number<double>(full, value);
      else if (full == "mesh.y0") cfg.domain.y0 = parse_number<double>(full, value);
      else if (full == "mesh.x1") cfg.domain.x1 = parse_number<double>(full, value);
      else if (full == "mesh.y1") cfg.domain.y1 = parse_number<double>(full, value);
      else if (full == "mesh.allow_non_acute") cfg.allow_non_acute = parse_bool(full, value);
      else if (full == "eps.C") cfg.eps.C = parse_number<double>(full, value);
      else if (full == "eps.gamma") cfg.eps.gamma = parse_number<double>(full, value);
      else if (full == "eps.delta") cfg.eps.delta = parse_number<double>(full, value);
      else if (full == "kernel.p") cfg.rule.p = parse_number<double>(full, value);
      else if (full == "rule.kind") cfg.rule.kind = trim(value);
      else if (full == "rule.r") cfg.rule.radius = parse_number<double>(full, value);
      else if (full == "rule.n_r") cfg.rule.n_r = parse_number<int>(full, value);
      else if (full == "rule.n_t") cfg.rule.n_t = parse_number<int>(full, value);
      else if (full == "solver.tol") cfg.solver.tol_F = parse_number<double>(full, value);
      else if (full == "solver.inner_tol") cfg.solver.inner_tol = parse_number<double>(full, value);
      else if (full == "solver.max_outer") cfg.solver.max_outer = parse_number<int>(full, value);
      else if (full == "solver.max_inner") cfg.solver.max_inner = parse_number<int>(full, value);
      else if (full == "solver.inexact") cfg.solver.inexact = parse_bool(full, value);
      else if (full == "solver.eta0") cfg.solver.eta0 = parse_number<double>(full, value);
      else if (full == "solver.init") {
        const std::string mode = trim(value);
        if (mode == "paraboloid") cfg.solver.init = InitMode::paraboloid;
        else if (mode == "zero") cfg.solver.init = InitMode::zero;
        else throw ConfigError("solver.init must be paraboloid or zero");
      } else if (full == "study.reference_n") cfg.reference_n = parse_number<int>(full, value);
      else if (full == "study.function") cfg.consistency_function = trim(value);
      else if (full == "study.ring_samples") cfg.ring_samples = parse_number<int>(full, value);
      else if (full == "output.dir") cfg.out_dir = trim(value);
      else if (full == "output.seed") cfg.seed = parse_number<std::uint64_t>(full, value);
      else if (full == "output.record_time") cfg.record_time = parse_bool(full, value);
    }
  }

  require(std::all_of(cfg.n.begin(), cfg.n.end(), [](int n) { return n >= 2; }), "mesh.n entries must be >= 2");
  require(cfg.domain.width() > 0.0 && cfg.domain.height() > 0.0, "mesh domain must have positive extent");
  require(cfg.eps.C > 0.0 && cfg.eps.gamma > 0.0 && cfg.eps.delta >= 0.0, "eps needs C > 0, gamma > 0, delta >= 0");
  require(cfg.rule.kind == "axis" || cfg.rule.kind == "polar", "rule.kind must be axis or polar");
  require(cfg.solver.tol_F >= 0.0 && cfg.solver.inner_tol >= 0.0, "solver tolerances must be positive");
  require(cfg.solver.eta0 > 0.0, "solver.eta0 must be positive");
  require(cfg.solver.max_outer >= 0 && cfg.solver.max_inner >= 0, "iteration caps must be nonnegative");
  require(cfg.reference_n >= 0, "study.reference_n must be nonnegative");
  require(cfg.consistency_function == "sine" || cfg.consistency_function == "quadratic",
          "study.function must be sine or quadratic");
  require(cfg.ring_samples >= 64, "study.ring_samples must be at least 64");
  require(cfg.custom.controls_a >= 1 && cfg.custom.controls_b >= 1 && cfg.custom.controls_a <= 10 &&
              cfg.custom.controls_b <= 10,
          "control counts must be between 1 and 10");
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in);
}

}  // namespace tsfem
