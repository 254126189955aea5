#ifndef TSE_CONFIG_HPP
#define TSE_CONFIG_HPP

#include "tse/certification.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tse {

/// Bad config text or values. Carries the line number when known.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  Environment env;
  Grid grid;
  PiecewiseConstantProfile profile = PiecewiseConstantProfile::reference();
  std::size_t sample_count = 15000;
  std::uint64_t seed = 0;

  int hidden_depth = 10;
  int hidden_width = 40;
  std::int64_t adam_iterations = 15000;
  AdamOptions adam;
  std::int64_t lbfgs_iterations = 50000;
  int lbfgs_memory = 10;
  double lbfgs_tolerance = 1e-9;
  int history_interval = 100;

  std::vector<double> sweep_v_f = {5, 10, 15, 20, 25, 30, 35, 40, 45};
  Thresholds thresholds;
  MetricKind metric = MetricKind::kDataMismatch;
  std::optional<double> normalization;  // unset: training-environment loss
  std::vector<double> sensors;          // empty: every space node

  std::filesystem::path output_dir = "run";

  /// Cross-field checks: profile covers the grid, sweep non-empty, etc.
  void validate() const;

  /// Training options, with the network seed split off the run seed.
  TrainConfig train_config() const;
  std::uint64_t sample_seed() const;

  /// Training speed first, then the sweep, without duplicates.
  std::vector<double> environments() const;

  friend bool operator==(const RunConfig&, const RunConfig&);
};

/// Independent stream for a pipeline stage; stable across releases.
std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage);

/// `key = value` lines; `#` starts a comment. Unset keys keep defaults.
RunConfig parse_config(const std::string& text);
/// Every key, in documentation order. parse_config(emit_config(c)) == c.
std::string emit_config(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);

/// One line per key: name, default and meaning.
std::string config_key_help();

}  // namespace tse

#endif  // TSE_CONFIG_HPP
