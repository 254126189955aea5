#include "tse/certification.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace tse {

namespace {

void require_same_grid(const Grid& a, const Grid& b) {
  if (!(a == b)) throw DomainError("fields are defined on different grids");
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const EvaluationRows& where) {
  if (where.all()) return m;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(where.rows.size()), m.cols());
  for (std::size_t k = 0; k < where.rows.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = m.row(where.rows[k]);
  }
  return out;
}

}  // namespace

void Thresholds::validate() const {
  if (!(reuse_max > 0.0 && reuse_max < refine_max)) {
    throw DomainError("thresholds require 0 < reuse_max < refine_max");
  }
}

std::string to_string(MetricKind kind) {
  return kind == MetricKind::kDataMismatch ? "data_mismatch" : "pde_residual";
}

MetricKind parse_metric_kind(const std::string& text) {
  if (text == "data_mismatch") return MetricKind::kDataMismatch;
  if (text == "pde_residual") return MetricKind::kPdeResidual;
  throw DomainError("unknown metric kind '" + text + "'");
}

char category_letter(Category c) {
  switch (c) {
    case Category::kReuse: return 'C';
    case Category::kRefine: return 'R';
    case Category::kDiscard: return 'D';
  }
  return '?';
}

Eigen::MatrixXd FieldEstimator::predict(const Grid& grid) const {
  require_same_grid(grid, field_.grid);
  return field_.rho;
}

TruthProvider lax_hopf_truth(const PiecewiseConstantProfile& profile, const Grid& grid) {
  return [profile, grid](const Environment& env) {
    return lax_hopf_solve(profile, env, grid).second;
  };
}

EvaluationRows EvaluationRows::sensors(const Grid& grid, const std::vector<double>& positions) {
  EvaluationRows out;
  for (double x : positions) {
    if (x < grid.x_min() || x > grid.x_max()) {
      throw DomainError("sensor position outside the grid");
    }
    out.rows.push_back(static_cast<Eigen::Index>(std::lround((x - grid.x_min()) / grid.dx())));
  }
  std::sort(out.rows.begin(), out.rows.end());
  out.rows.erase(std::unique(out.rows.begin(), out.rows.end()), out.rows.end());
  return out;
}

double rel_l2_error(const DensityField& predicted, const DensityField& truth,
                    const EvaluationRows& where) {
  require_same_grid(predicted.grid, truth.grid);
  const Eigen::MatrixXd p = select_rows(predicted.rho, where);
  const Eigen::MatrixXd t = select_rows(truth.rho, where);
  const double denominator = t.norm();
  if (!(denominator > 0.0)) throw DomainError("rel_l2_error: truth field has zero norm");
  return (t - p).norm() / denominator;
}

double pde_residual_loss(const DensityField& field, const Environment& env,
                         const EvaluationRows& where) {
  const Grid& g = field.grid;
  const Eigen::Index nx = g.space_nodes();
  const Eigen::Index nt = g.time_nodes();
  if (nx < 3 || nt < 3) throw DomainError("pde_residual_loss needs at least 3x3 nodes");
  const Eigen::MatrixXd& rho = field.rho;
  const Eigen::MatrixXd q = rho.unaryExpr([&](double r) { return flux_unchecked(r, env); });
  const Eigen::MatrixXd residual =
      (rho.block(1, 2, nx - 2, nt - 2) - rho.block(1, 0, nx - 2, nt - 2)) / (2.0 * g.dt()) +
      (q.block(2, 1, nx - 2, nt - 2) - q.block(0, 1, nx - 2, nt - 2)) / (2.0 * g.dx());
  if (where.all()) return residual.squaredNorm() / static_cast<double>(residual.size());
  double sum = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index row : where.rows) {
    if (row < 1 || row > nx - 2) continue;
    sum += residual.row(row - 1).squaredNorm();
    count += residual.cols();
  }
  if (count == 0) throw DomainError("pde_residual_loss: no interior sensor rows");
  return sum / static_cast<double>(count);
}

double bound_violation_rate(const DensityField& predicted, const Environment& env) {
  const auto& rho = predicted.rho.array();
  const auto outside = ((rho < 0.0) || (rho > env.jam_density)).count();
  return static_cast<double>(outside) / static_cast<double>(predicted.rho.size());
}

double physics_loss_of(const Eigen::MatrixXd& prediction, const Environment& env,
                       const Grid& grid, MetricKind kind, const TruthProvider& truth,
                       const EvaluationRows& where) {
  const DensityField field(grid, env, prediction);
  if (kind == MetricKind::kPdeResidual) return pde_residual_loss(field, env, where);
  return rel_l2_error(field, truth(env), where);
}

double physics_loss(const DensityEstimator& model, const Environment& env, const Grid& grid,
                    const PiecewiseConstantProfile& profile, MetricKind kind) {
  return physics_loss_of(model.predict(grid), env, grid, kind, lax_hopf_truth(profile, grid));
}

NplResult normalize_losses(const std::vector<Environment>& envs, const std::vector<double>& raw,
                           double training_raw, std::optional<double> normalization) {
  if (envs.empty()) throw DomainError("no environments to normalize");
  NplResult out;
  out.normalization_constant =
      normalization ? *normalization : std::max(training_raw, kNormalizationFloor);
  if (!(out.normalization_constant > 0.0) || !std::isfinite(out.normalization_constant)) {
    throw DomainError("normalization constant must be positive and finite");
  }
  for (std::size_t k = 0; k < envs.size(); ++k) {
    out.entries.push_back({envs[k], raw[k], raw[k] / out.normalization_constant});
  }
  return out;
}

NplResult compute_npl(const DensityEstimator& model, const Environment& training_env,
                      const std::vector<Environment>& envs, const Grid& grid,
                      const PiecewiseConstantProfile& profile, MetricKind kind,
                      std::optional<double> normalization) {
  if (envs.empty()) throw DomainError("compute_npl: empty environment list");
  const Eigen::MatrixXd prediction = model.predict(grid);
  const TruthProvider truth = lax_hopf_truth(profile, grid);
  std::vector<double> raw;
  std::optional<double> training_raw;
  for (const Environment& env : envs) {
    raw.push_back(physics_loss_of(prediction, env, grid, kind, truth));
    if (env == training_env) training_raw = raw.back();
  }
  if (!training_raw && !normalization) {
    training_raw = physics_loss_of(prediction, training_env, grid, kind, truth);
  }
  return normalize_losses(envs, raw, training_raw.value_or(0.0), normalization);
}

Category classify(double npl, const Thresholds& thresholds) {
  thresholds.validate();
  if (!(npl >= 0.0)) throw DomainError("classify: npl must be >= 0");
  if (npl <= thresholds.reuse_max) return Category::kReuse;
  if (npl <= thresholds.refine_max) return Category::kRefine;
  return Category::kDiscard;
}

CertificationReport certification_sweep(const DensityEstimator& model,
                                        const Environment& training_env,
                                        std::vector<double> v_f_list, const Grid& grid,
                                        const PiecewiseConstantProfile& profile,
                                        const SweepOptions& options) {
  if (v_f_list.empty()) throw DomainError("certification_sweep: empty v_f list");
  options.thresholds.validate();
  std::sort(v_f_list.begin(), v_f_list.end());
  const TruthProvider truth = options.truth ? options.truth : lax_hopf_truth(profile, grid);
  const Eigen::MatrixXd prediction = model.predict(grid);

  std::vector<Environment> envs;
  std::vector<double> raw;
  std::optional<double> training_raw;
  for (double v_f : v_f_list) {
    envs.emplace_back(v_f, training_env.jam_density);
    raw.push_back(physics_loss_of(prediction, envs.back(), grid, options.metric, truth,
                                  options.where));
    if (envs.back() == training_env) training_raw = raw.back();
  }
  if (!training_raw && !options.normalization) {
    training_raw =
        physics_loss_of(prediction, training_env, grid, options.metric, truth, options.where);
  }
  const NplResult npl = normalize_losses(envs, raw, training_raw.value_or(0.0),
                                         options.normalization);

  CertificationReport report;
  report.training_env = training_env;
  report.metric = options.metric;
  report.normalization_constant = npl.normalization_constant;
  report.thresholds = options.thresholds;
  for (const NplEntry& e : npl.entries) {
    const DensityField field(grid, e.env, prediction);
    report.rows.push_back({e.env, e.raw_loss, e.npl, classify(e.npl, options.thresholds),
                           bound_violation_rate(field, e.env)});
  }
  return report;
}

TrainConfig default_refine_budget(TrainConfig base) {
  base.adam_iterations = 2000;
  base.lbfgs_iterations = 5000;
  return base;
}

std::pair<MlpParams<double>, TrainReport> refine(const MlpParams<double>& model,
                                                 const SampleSet& old_samples,
                                                 const SampleSet& new_samples,
                                                 const TrainConfig& budget) {
  if (new_samples.points.empty()) throw DomainError("refine: no samples from the new environment");
  MlpParams<double> params = model;
  TrainReport report = train_from(params, merge(old_samples, new_samples), budget);
  return {std::move(params), std::move(report)};
}

void write_report_csv(std::ostream& out, const CertificationReport& report) {
  out << std::setprecision(9);
  out << "# metric: " << to_string(report.metric) << '\n';
  out << "# normalization_constant: " << report.normalization_constant << '\n';
  out << "# training_env: v_f=" << report.training_env.free_flow_speed
      << " rho_m=" << report.training_env.jam_density << '\n';
  out << "# thresholds: reuse_max=" << report.thresholds.reuse_max
      << " refine_max=" << report.thresholds.refine_max << '\n';
  out << "v_f,raw_loss,npl,category,bound_violation_rate\n";
  for (const CertRow& row : report.rows) {
    out << row.env.free_flow_speed << ',' << row.raw_loss << ',' << row.npl << ','
        << category_letter(row.category) << ',' << row.bound_violation_rate << '\n';
  }
}

void write_report_table(std::ostream& out, const CertificationReport& report) {
  constexpr int kLabel = 26;
  constexpr int kCell = 9;
  out << "# metric: " << to_string(report.metric) << '\n';
  out << "# normalization_constant: " << std::setprecision(9) << report.normalization_constant
      << '\n';
  auto line = [&](const std::string& label, auto&& cell) {
    out << std::left << std::setw(kLabel) << label << std::right;
    for (const CertRow& row : report.rows) out << std::setw(kCell) << cell(row);
    out << '\n';
  };
  auto number = [](double v, int precision) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << v;
    return s.str();
  };
  line("v_f", [&](const CertRow& r) { return number(r.env.free_flow_speed, 0); });
  line("Environment", [&](const CertRow& r) { return number(r.env.free_flow_speed, 0); });
  line("Normalized Physics Loss", [&](const CertRow& r) { return number(r.npl, 2); });
  line("Certification Category",
       [&](const CertRow& r) { return std::string(1, category_letter(r.category)); });
}

}  // namespace tse
