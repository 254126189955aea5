#ifndef TSE_PIPELINE_HPP
#define TSE_PIPELINE_HPP

#include "tse/config.hpp"
#include "tse/io.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tse {

inline constexpr const char* kToolVersion = "0.1.0";

struct ManifestFile {
  std::string path;  // relative to the run directory
  std::string sha256;
  std::string stage;
};

/// Reproducibility record kept as manifest.json in the run directory.
struct RunManifest {
  std::string config;  // emit_config snapshot
  std::string tool_version = kToolVersion;
  std::vector<ManifestFile> files;
  std::map<std::string, double> wall_seconds;
  std::map<std::string, double> cross_check_l1;  // keyed by formatted v_f
  std::vector<std::string> notes;

  static std::filesystem::path path_in(const std::filesystem::path& run_dir);
  /// Throws std::runtime_error("no manifest ...") if absent.
  static RunManifest load(const std::filesystem::path& run_dir);
  /// Fresh manifest if none exists yet.
  static RunManifest load_or_new(const std::filesystem::path& run_dir);
  void save(const std::filesystem::path& run_dir) const;

  /// Replaces any earlier entry for the same path and hashes the file now.
  void record(const std::filesystem::path& run_dir, const std::string& relative,
              const std::string& stage);
  /// Names of listed files that are missing or whose hash changed.
  std::vector<std::string> stale(const std::filesystem::path& run_dir) const;
};

std::string dataset_name(double v_f);
inline constexpr const char* kModelName = "model.tsem";
inline constexpr const char* kTrainReportName = "train_report.txt";
inline constexpr const char* kTrainHistoryName = "train_history.csv";
inline constexpr const char* kCertCsvName = "certification.csv";
inline constexpr const char* kCertTableName = "certification_table.txt";
inline constexpr const char* kSummaryName = "summary.txt";
inline constexpr const char* kNplCurveName = "npl_curve.csv";

/// Solves every environment and writes one dataset per speed.
void cmd_generate(const RunConfig& config, std::ostream& log);
/// Samples the training dataset (default: the run's own) and fits the model.
void cmd_train(const RunConfig& config, std::ostream& log,
               const std::optional<std::filesystem::path>& dataset = std::nullopt);
/// Sweeps the model over the configured speeds. Missing datasets are
/// regenerated and noted in the manifest.
CertificationReport cmd_certify(const RunConfig& config, std::ostream& log,
                                const std::optional<std::filesystem::path>& model = std::nullopt);
/// Summary text and npl_curve.csv from a finished run directory.
void cmd_report(const std::filesystem::path& run_dir, std::ostream& log);

}  // namespace tse

#endif  // TSE_PIPELINE_HPP
