#include "tse/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace tse {

namespace {

// Flat view of RunConfig: the grid, environment and profile are only
// constructed once every key has been read.
struct Draft {
  double x_min = 0.0, x_max = 1000.0, dx = 2.0, t_max = 50.0, dt = 0.1;
  double v_f = 25.0, rho_m = 0.15;
  std::vector<double> breakpoints = PiecewiseConstantProfile::reference().breakpoints();
  std::vector<double> values = PiecewiseConstantProfile::reference().values();
  std::string normalization = "auto";
  RunConfig rest;
};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

template <typename T>
T parse_number(const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("not a number: '" + text + "'");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw ConfigError("not a finite number: '" + text + "'");
  }
  return value;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  if (text.empty()) return out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_number<double>(trim(item)));
  return out;
}

std::string format_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k) out += ',';
    out += format_double(values[k]);
  }
  return out;
}

struct Key {
  const char* name;
  const char* default_text;
  const char* help;
  std::function<void(Draft&, const std::string&)> set;
  std::function<std::string(const Draft&)> get;
};

template <typename T>
Key number_key(const char* name, const char* def, const char* help, T Draft::*member) {
  return {name, def, help, [member](Draft& d, const std::string& v) { d.*member = parse_number<T>(v); },
          [member](const Draft& d) {
            if constexpr (std::is_floating_point_v<T>) return format_double(d.*member);
            else return std::to_string(d.*member);
          }};
}

template <typename T>
Key rest_key(const char* name, const char* def, const char* help, T RunConfig::*member) {
  return {name, def, help,
          [member](Draft& d, const std::string& v) { d.rest.*member = parse_number<T>(v); },
          [member](const Draft& d) {
            if constexpr (std::is_floating_point_v<T>) return format_double(d.rest.*member);
            else return std::to_string(d.rest.*member);
          }};
}

template <typename T>
Key adam_key(const char* name, const char* def, const char* help, T AdamOptions::*member) {
  return {name, def, help,
          [member](Draft& d, const std::string& v) { d.rest.adam.*member = parse_number<T>(v); },
          [member](const Draft& d) { return format_double(d.rest.adam.*member); }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      number_key("env.v_f", "25", "free-flow speed of the training environment (m/s)", &Draft::v_f),
      number_key("env.rho_m", "0.15", "jam density (veh/m), shared by every environment", &Draft::rho_m),
      number_key("grid.x_min", "0", "road start (m)", &Draft::x_min),
      number_key("grid.x_max", "1000", "road end (m)", &Draft::x_max),
      number_key("grid.dx", "2", "space step (m); must divide the road length", &Draft::dx),
      number_key("grid.t_max", "50", "time horizon (s)", &Draft::t_max),
      number_key("grid.dt", "0.1", "time step (s); must divide the horizon", &Draft::dt),
      {"profile.breakpoints", "0,200,500,1000", "initial-density piece boundaries (m), increasing",
       [](Draft& d, const std::string& v) { d.breakpoints = parse_list(v); },
       [](const Draft& d) { return format_list(d.breakpoints); }},
      {"profile.values", "0.13,0.06,0.03", "initial density on each piece (veh/m)",
       [](Draft& d, const std::string& v) { d.values = parse_list(v); },
       [](const Draft& d) { return format_list(d.values); }},
      rest_key("sample_count", "15000", "training samples drawn from the training field",
               &RunConfig::sample_count),
      rest_key("seed", "0", "run seed; each stage derives its own stream from it", &RunConfig::seed),
      rest_key("train.hidden_depth", "10", "number of tanh hidden layers", &RunConfig::hidden_depth),
      rest_key("train.hidden_width", "40", "units per hidden layer", &RunConfig::hidden_width),
      rest_key("train.adam_iterations", "15000", "full-batch Adam steps",
               &RunConfig::adam_iterations),
      adam_key("train.adam_learning_rate", "0.001", "Adam step size", &AdamOptions::learning_rate),
      adam_key("train.adam_beta1", "0.9", "Adam first-moment decay", &AdamOptions::beta1),
      adam_key("train.adam_beta2", "0.999", "Adam second-moment decay", &AdamOptions::beta2),
      adam_key("train.adam_epsilon", "1e-08", "Adam denominator guard", &AdamOptions::epsilon),
      rest_key("train.lbfgs_iterations", "50000", "L-BFGS iteration cap after Adam",
               &RunConfig::lbfgs_iterations),
      rest_key("train.lbfgs_memory", "10", "L-BFGS correction pairs kept", &RunConfig::lbfgs_memory),
      rest_key("train.lbfgs_tolerance", "1e-09", "L-BFGS stops when the gradient norm falls below",
               &RunConfig::lbfgs_tolerance),
      rest_key("train.history_interval", "100", "iterations between recorded loss values",
               &RunConfig::history_interval),
      {"sweep.v_f", "5,10,15,20,25,30,35,40,45", "free-flow speeds to certify (m/s)",
       [](Draft& d, const std::string& v) { d.rest.sweep_v_f = parse_list(v); },
       [](const Draft& d) { return format_list(d.rest.sweep_v_f); }},
      {"certify.metric", "data_mismatch", "data_mismatch or pde_residual",
       [](Draft& d, const std::string& v) {
         try {
           d.rest.metric = parse_metric_kind(v);
         } catch (const DomainError& e) {
           throw ConfigError(e.what());
         }
       },
       [](const Draft& d) { return to_string(d.rest.metric); }},
      {"certify.reuse_max", "2", "largest normalized loss classified C (reuse)",
       [](Draft& d, const std::string& v) { d.rest.thresholds.reuse_max = parse_number<double>(v); },
       [](const Draft& d) { return format_double(d.rest.thresholds.reuse_max); }},
      {"certify.refine_max", "5", "largest normalized loss classified R (refine); above is D",
       [](Draft& d, const std::string& v) { d.rest.thresholds.refine_max = parse_number<double>(v); },
       [](const Draft& d) { return format_double(d.rest.thresholds.refine_max); }},
      {"certify.normalization", "auto",
       "auto (training-environment loss, floored at 1e-9) or a fixed positive constant",
       [](Draft& d, const std::string& v) {
         if (v != "auto") parse_number<double>(v);
         d.normalization = v;
       },
       [](const Draft& d) { return d.normalization; }},
      {"certify.sensors", "", "sensor positions (m) to evaluate on; empty means every node",
       [](Draft& d, const std::string& v) { d.rest.sensors = parse_list(v); },
       [](const Draft& d) { return format_list(d.rest.sensors); }},
      {"output_dir", "run", "directory receiving every artifact; --output overrides it",
       [](Draft& d, const std::string& v) { d.rest.output_dir = v; },
       [](const Draft& d) { return d.rest.output_dir.string(); }},
  };
  return table;
}

Draft draft_of(const RunConfig& c) {
  Draft d;
  d.x_min = c.grid.x_min();
  d.x_max = c.grid.x_max();
  d.dx = c.grid.dx();
  d.t_max = c.grid.t_max();
  d.dt = c.grid.dt();
  d.v_f = c.env.free_flow_speed;
  d.rho_m = c.env.jam_density;
  d.breakpoints = c.profile.breakpoints();
  d.values = c.profile.values();
  d.normalization = c.normalization ? format_double(*c.normalization) : "auto";
  d.rest = c;
  return d;
}

RunConfig build(const Draft& d) {
  RunConfig c = d.rest;
  try {
    c.env = Environment(d.v_f, d.rho_m);
    c.grid = Grid(d.x_min, d.x_max, d.dx, d.t_max, d.dt);
    c.profile = PiecewiseConstantProfile(d.breakpoints, d.values);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  c.normalization.reset();
  if (d.normalization != "auto") c.normalization = parse_number<double>(d.normalization);
  c.validate();
  return c;
}

}  // namespace

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  try {
    profile.validate_for(env, grid);
    thresholds.validate();
    train_config().validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(e.what());
  }
  if (sample_count == 0 || sample_count > static_cast<std::size_t>(grid.node_count())) {
    fail("sample_count must be between 1 and the number of grid nodes");
  }
  if (sweep_v_f.empty()) fail("sweep.v_f is empty");
  for (double v : sweep_v_f) {
    if (!(v > 0.0)) fail("sweep.v_f entries must be positive");
  }
  if (normalization && !(*normalization > 0.0)) fail("certify.normalization must be positive");
  for (double x : sensors) {
    if (x < grid.x_min() || x > grid.x_max()) fail("certify.sensors outside the road");
  }
  if (output_dir.empty()) fail("output_dir is empty");
}

std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage) {
  // splitmix64 finalizer over (seed, stage).
  std::uint64_t z = seed + (stage + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t RunConfig::sample_seed() const { return stage_seed(seed, 1); }

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.layer_sizes = hidden_architecture(hidden_depth, hidden_width);
  t.adam_iterations = adam_iterations;
  t.adam = adam;
  t.lbfgs_iterations = lbfgs_iterations;
  t.lbfgs_memory = lbfgs_memory;
  t.lbfgs_tolerance = lbfgs_tolerance;
  t.seed = stage_seed(seed, 2);
  t.normalization = InputNormalization<double>::to_unit_box(grid.x_min(), grid.x_max(), 0.0,
                                                            grid.t_max());
  t.history_interval = history_interval;
  return t;
}

std::vector<double> RunConfig::environments() const {
  std::vector<double> out = {env.free_flow_speed};
  for (double v : sweep_v_f) {
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  return out;
}

bool operator==(const RunConfig& a, const RunConfig& b) { return emit_config(a) == emit_config(b); }

RunConfig parse_config(const std::string& text) {
  std::map<std::string, const Key*> by_name;
  for (const Key& k : keys()) by_name[k.name] = &k;
  Draft d;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = by_name.find(key);
    if (it == by_name.end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (seen.count(key)) {
      throw ConfigError(where + "'" + key + "' already set on line " + std::to_string(seen[key]));
    }
    seen[key] = line_no;
    try {
      it->second->set(d, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  return build(d);
}

std::string emit_config(const RunConfig& config) {
  const Draft d = draft_of(config);
  std::string out;
  for (const Key& k : keys()) out += std::string(k.name) + " = " + k.get(d) + '\n';
  return out;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string config_key_help() {
  std::ostringstream out;
  out << "Config file: one 'key = value' per line, '#' starts a comment, lists are\n"
         "comma-separated. Unset keys keep their defaults.\n\n";
  for (const Key& k : keys()) {
    out << "  " << k.name << " (default: " << (*k.default_text ? k.default_text : "empty")
        << ")\n      " << k.help << '\n';
  }
  return out.str();
}

}  // namespace tse
