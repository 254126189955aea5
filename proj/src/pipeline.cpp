#include "tse/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace tse {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kManifestName = "manifest.json";

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string exact(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::string short_number(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory " + dir.string());
  }
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void require_matches(const DensityField& field, const RunConfig& config, double v_f,
                     const fs::path& path) {
  if (!(field.grid == config.grid) || field.env.free_flow_speed != v_f ||
      field.env.jam_density != config.env.jam_density) {
    throw std::runtime_error(path.string() + ": dataset does not match the configured grid and "
                             "environment");
  }
}

DensityField solve_and_save(const RunConfig& config, double v_f, const fs::path& run_dir,
                            RunManifest& manifest, const std::string& stage, std::ostream& log) {
  const Environment env(v_f, config.env.jam_density);
  DensityField truth = lax_hopf_solve(config.profile, env, config.grid).second;
  const DensityField check = godunov_solve(config.profile, env, config.grid);
  const double l1 = mean_abs_difference(truth, check);
  const std::string name = dataset_name(v_f);
  save_dataset(run_dir / name, truth);
  manifest.record(run_dir, name, stage);
  manifest.cross_check_l1[short_number(v_f)] = l1;
  log << "  v_f=" << short_number(v_f) << "  mass_balance=" << std::setprecision(4)
      << mass_balance(truth) << "  godunov_l1=" << l1 << "  -> " << name << '\n';
  return truth;
}

}  // namespace

fs::path RunManifest::path_in(const fs::path& run_dir) { return run_dir / kManifestName; }

RunManifest RunManifest::load(const fs::path& run_dir) {
  const fs::path path = path_in(run_dir);
  if (!fs::exists(path)) throw std::runtime_error("no manifest in " + run_dir.string());
  json j;
  try {
    j = json::parse(read_text(path));
    RunManifest m;
    m.config = j.at("config").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    for (const auto& f : j.at("files")) {
      m.files.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>(),
                         f.at("stage").get<std::string>()});
    }
    m.wall_seconds = j.at("wall_seconds").get<std::map<std::string, double>>();
    m.cross_check_l1 = j.at("cross_check_l1").get<std::map<std::string, double>>();
    m.notes = j.at("notes").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed manifest: " + e.what());
  }
}

RunManifest RunManifest::load_or_new(const fs::path& run_dir) {
  return fs::exists(path_in(run_dir)) ? load(run_dir) : RunManifest{};
}

void RunManifest::save(const fs::path& run_dir) const {
  json files = json::array();
  for (const auto& f : this->files) {
    if (!fs::exists(run_dir / f.path)) {
      throw std::runtime_error("manifest lists missing file " + f.path);
    }
    files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"stage", f.stage}});
  }
  json j;
  j["tool_version"] = tool_version;
  j["config"] = config;
  j["files"] = files;
  j["wall_seconds"] = wall_seconds;
  j["cross_check_l1"] = cross_check_l1;
  j["notes"] = notes;
  write_text_file(path_in(run_dir), j.dump(2) + "\n");
}

void RunManifest::record(const fs::path& run_dir, const std::string& relative,
                         const std::string& stage) {
  std::erase_if(files, [&](const ManifestFile& f) { return f.path == relative; });
  files.push_back({relative, sha256_file(run_dir / relative), stage});
}

std::vector<std::string> RunManifest::stale(const fs::path& run_dir) const {
  std::vector<std::string> out;
  for (const auto& f : files) {
    const fs::path p = run_dir / f.path;
    if (!fs::exists(p) || sha256_file(p) != f.sha256) out.push_back(f.path);
  }
  return out;
}

std::string dataset_name(double v_f) { return "datasets/vf_" + short_number(v_f) + ".tsed"; }

void cmd_generate(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Stopwatch clock;
  const fs::path dir = config.output_dir;
  ensure_dir(dir / "datasets");
  RunManifest manifest = RunManifest::load_or_new(dir);
  manifest.config = emit_config(config);
  log << "generate: " << config.environments().size() << " environments on a "
      << config.grid.space_nodes() << "x" << config.grid.time_nodes() << " grid\n";
  for (double v_f : config.environments()) solve_and_save(config, v_f, dir, manifest, "generate", log);
  manifest.wall_seconds["generate"] = clock.seconds();
  manifest.save(dir);
}

void cmd_train(const RunConfig& config, std::ostream& log,
               const std::optional<fs::path>& dataset) {
  config.validate();
  const Stopwatch clock;
  const fs::path dir = config.output_dir;
  ensure_dir(dir);
  const fs::path source = dataset ? *dataset : dir / dataset_name(config.env.free_flow_speed);
  const DensityField field = load_dataset(source);
  require_matches(field, config, config.env.free_flow_speed, source);

  const SampleSet samples = sample_dataset(field, config.sample_count, config.sample_seed());
  const TrainConfig train_config = config.train_config();
  log << "train: " << samples.size() << " samples, " << train_config.adam_iterations
      << " Adam + up to " << train_config.lbfgs_iterations << " L-BFGS iterations\n";
  const auto [params, report] = train(samples, train_config);
  save_model(dir / kModelName, params);

  std::ostringstream text;
  text << "parameter_count = " << params.parameter_count() << '\n'
       << "samples = " << samples.size() << '\n'
       << "sample_seed = " << config.sample_seed() << '\n'
       << "init_seed = " << train_config.seed << '\n'
       << "initial_mse = " << exact(report.initial_mse) << '\n'
       << "final_mse = " << exact(report.final_mse) << '\n'
       << "adam_iterations = " << report.adam_iterations_run << '\n'
       << "lbfgs_iterations = " << report.lbfgs_iterations_run << '\n'
       << "lbfgs_evaluations = " << report.lbfgs_evaluations << '\n'
       << "lbfgs_memory_resets = " << report.lbfgs_memory_resets << '\n'
       << "lbfgs_stop_reason = " << report.lbfgs_stop_reason << '\n'
       << "full_grid_rel_l2 = "
       << exact(rel_l2_error(DensityField(field.grid, field.env, predict_grid(params, field.grid)),
                             field))
       << '\n';
  write_text_file(dir / kTrainReportName, text.str());
  std::ostringstream history;
  history << "phase,iteration,mse\n";
  for (const auto& h : report.mse_history) {
    history << h.phase << ',' << h.iteration << ',' << exact(h.mse) << '\n';
  }
  write_text_file(dir / kTrainHistoryName, history.str());

  RunManifest manifest = RunManifest::load_or_new(dir);
  manifest.config = emit_config(config);
  for (const char* name : {kModelName, kTrainReportName, kTrainHistoryName}) {
    manifest.record(dir, name, "train");
  }
  manifest.wall_seconds["train"] = clock.seconds();
  manifest.save(dir);
  log << "train: final_mse=" << std::setprecision(6) << report.final_mse << " ("
      << report.lbfgs_stop_reason << ") in " << std::setprecision(4) << report.wall_time_seconds
      << " s\n";
}

CertificationReport cmd_certify(const RunConfig& config, std::ostream& log,
                                const std::optional<fs::path>& model) {
  config.validate();
  const Stopwatch clock;
  const fs::path dir = config.output_dir;
  ensure_dir(dir / "datasets");
  RunManifest manifest = RunManifest::load_or_new(dir);
  manifest.config = emit_config(config);
  const MlpEstimator estimator(load_model(model ? *model : dir / kModelName));

  std::map<double, DensityField> truth;
  std::vector<double> speeds = config.sweep_v_f;
  speeds.push_back(config.env.free_flow_speed);
  for (double v_f : speeds) {
    if (truth.count(v_f)) continue;
    const fs::path path = dir / dataset_name(v_f);
    if (fs::exists(path)) {
      DensityField field = load_dataset(path);
      require_matches(field, config, v_f, path);
      truth.emplace(v_f, std::move(field));
    } else {
      log << "certify: " << dataset_name(v_f) << " missing, regenerating\n";
      truth.emplace(v_f, solve_and_save(config, v_f, dir, manifest, "certify", log));
      manifest.notes.push_back("regenerated " + dataset_name(v_f) + " during certify");
    }
  }

  SweepOptions options;
  options.metric = config.metric;
  options.thresholds = config.thresholds;
  options.normalization = config.normalization;
  if (!config.sensors.empty()) options.where = EvaluationRows::sensors(config.grid, config.sensors);
  options.truth = [&truth](const Environment& env) { return truth.at(env.free_flow_speed); };
  const CertificationReport report = certification_sweep(
      estimator, config.env, config.sweep_v_f, config.grid, config.profile, options);

  std::ostringstream csv, table;
  write_report_csv(csv, report);
  write_report_table(table, report);
  write_text_file(dir / kCertCsvName, csv.str());
  write_text_file(dir / kCertTableName, table.str());
  manifest.record(dir, kCertCsvName, "certify");
  manifest.record(dir, kCertTableName, "certify");
  manifest.wall_seconds["certify"] = clock.seconds();
  manifest.save(dir);
  log << table.str();
  return report;
}

void cmd_report(const fs::path& run_dir, std::ostream& log) {
  RunManifest manifest = RunManifest::load(run_dir);
  const Stopwatch clock;
  std::erase_if(manifest.files, [](const ManifestFile& f) { return f.stage == "report"; });
  const auto stale = manifest.stale(run_dir);
  if (!stale.empty()) {
    std::string names;
    for (const auto& s : stale) names += " " + s;
    throw std::runtime_error("artifacts changed since they were recorded:" + names);
  }
  const fs::path cert = run_dir / kCertCsvName;
  if (!fs::exists(cert)) throw std::runtime_error("no certification report in " + run_dir.string());

  std::istringstream in(read_text(cert));
  std::string line;
  std::ostringstream curve;
  curve << "v_f,npl,category\n";
  std::map<char, int> counts = {{'C', 0}, {'R', 0}, {'D', 0}};
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5 || cells[3].size() != 1) {
      throw FormatError(cert.string() + ": malformed row '" + line + "'");
    }
    curve << cells[0] << ',' << cells[2] << ',' << cells[3] << '\n';
    ++counts[cells[3][0]];
  }

  std::ostringstream summary;
  summary << "Certification summary\n\n" << read_text(run_dir / kCertTableName) << '\n';
  summary << "Reuse (C): " << counts['C'] << "  Refine (R): " << counts['R']
          << "  Discard (D): " << counts['D'] << "\n\n";
  if (fs::exists(run_dir / kTrainReportName)) {
    summary << "Training\n" << read_text(run_dir / kTrainReportName) << '\n';
  }
  summary << "Solver cross-check (mean |Lax-Hopf - Godunov|)\n";
  std::vector<std::pair<double, std::string>> speeds;
  for (const auto& entry : manifest.cross_check_l1) speeds.emplace_back(std::stod(entry.first), entry.first);
  std::sort(speeds.begin(), speeds.end());
  for (const auto& [value, key] : speeds) {
    summary << "  v_f=" << key << ": " << std::setprecision(4) << manifest.cross_check_l1.at(key)
            << '\n';
  }
  // The run directory is left out so identical runs in different places match.
  summary << "\nConfiguration\n";
  std::istringstream config_lines(manifest.config);
  while (std::getline(config_lines, line)) {
    if (line.rfind("output_dir", 0) != 0) summary << line << '\n';
  }

  write_text_file(run_dir / kNplCurveName, curve.str());
  write_text_file(run_dir / kSummaryName, summary.str());
  manifest.record(run_dir, kNplCurveName, "report");
  manifest.record(run_dir, kSummaryName, "report");
  manifest.wall_seconds["report"] = clock.seconds();
  manifest.save(run_dir);
  log << "report: wrote " << kSummaryName << " and " << kNplCurveName << '\n';
}

}  // namespace tse
