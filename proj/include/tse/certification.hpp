#ifndef TSE_CERTIFICATION_HPP
#define TSE_CERTIFICATION_HPP

#include "tse/lwr.hpp"
#include "tse/train.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tse {

struct Thresholds {
  double reuse_max = 2.0;
  double refine_max = 5.0;
  void validate() const;
  friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

enum class MetricKind { kDataMismatch, kPdeResidual };

std::string to_string(MetricKind kind);
MetricKind parse_metric_kind(const std::string& text);

/// Ordered Reuse < Refine < Discard.
enum class Category { kReuse = 0, kRefine = 1, kDiscard = 2 };

char category_letter(Category c);

struct CertRow {
  Environment env;
  double raw_loss = 0.0;
  double npl = 0.0;
  Category category = Category::kReuse;
  double bound_violation_rate = 0.0;
};

struct CertificationReport {
  Environment training_env;
  MetricKind metric = MetricKind::kDataMismatch;
  double normalization_constant = 1.0;
  std::vector<CertRow> rows;  // ascending v_f
  Thresholds thresholds;
};

/// Anything that can produce a density prediction on a grid. The
/// prediction does not depend on the environment being certified.
class DensityEstimator {
 public:
  virtual ~DensityEstimator() = default;
  virtual Eigen::MatrixXd predict(const Grid& grid) const = 0;
};

class MlpEstimator final : public DensityEstimator {
 public:
  explicit MlpEstimator(MlpParams<double> params) : params_(std::move(params)) {}
  Eigen::MatrixXd predict(const Grid& grid) const override { return predict_grid(params_, grid); }
  const MlpParams<double>& params() const { return params_; }

 private:
  MlpParams<double> params_;
};

/// Replays a stored field; only defined on that field's grid.
class FieldEstimator final : public DensityEstimator {
 public:
  explicit FieldEstimator(DensityField field) : field_(std::move(field)) {}
  Eigen::MatrixXd predict(const Grid& grid) const override;

 private:
  DensityField field_;
};

class ConstantEstimator final : public DensityEstimator {
 public:
  explicit ConstantEstimator(double value) : value_(value) {}
  Eigen::MatrixXd predict(const Grid& grid) const override {
    return Eigen::MatrixXd::Constant(grid.space_nodes(), grid.time_nodes(), value_);
  }

 private:
  double value_;
};

/// Ground truth for one environment. Defaults to the Lax-Hopf solution.
using TruthProvider = std::function<DensityField(const Environment&)>;
TruthProvider lax_hopf_truth(const PiecewiseConstantProfile& profile, const Grid& grid);

/// Space-node rows a metric is evaluated on; empty means every row.
struct EvaluationRows {
  std::vector<Eigen::Index> rows;

  /// Nearest grid rows to each sensor position, deduplicated and sorted.
  static EvaluationRows sensors(const Grid& grid, const std::vector<double>& positions);
  bool all() const { return rows.empty(); }
};

/// sqrt(sum |rho - rho_hat|^2) / sqrt(sum |rho|^2) over the grid.
double rel_l2_error(const DensityField& predicted, const DensityField& truth,
                    const EvaluationRows& where = {});

/// Mean squared central-difference residual of rho_t + Q(rho)_x at interior nodes.
double pde_residual_loss(const DensityField& field, const Environment& env,
                         const EvaluationRows& where = {});

/// Fraction of nodes with rho < 0 or rho > rho_m.
double bound_violation_rate(const DensityField& predicted, const Environment& env);

/// Loss of an already-evaluated prediction in one environment.
double physics_loss_of(const Eigen::MatrixXd& prediction, const Environment& env,
                       const Grid& grid, MetricKind kind, const TruthProvider& truth,
                       const EvaluationRows& where = {});

double physics_loss(const DensityEstimator& model, const Environment& env, const Grid& grid,
                    const PiecewiseConstantProfile& profile, MetricKind kind);

struct NplEntry {
  Environment env;
  double raw_loss = 0.0;
  double npl = 0.0;
};

struct NplResult {
  double normalization_constant = 1.0;
  std::vector<NplEntry> entries;
};

inline constexpr double kNormalizationFloor = 1e-9;

/// npl = raw / constant. Without an explicit constant, the constant is
/// max(raw loss in the training environment, kNormalizationFloor).
NplResult compute_npl(const DensityEstimator& model, const Environment& training_env,
                      const std::vector<Environment>& envs, const Grid& grid,
                      const PiecewiseConstantProfile& profile, MetricKind kind,
                      std::optional<double> normalization = std::nullopt);

/// Same, from raw losses already computed.
NplResult normalize_losses(const std::vector<Environment>& envs, const std::vector<double>& raw,
                           double training_raw, std::optional<double> normalization);

/// C for npl <= reuse_max, R up to refine_max, D above. Zero is C.
Category classify(double npl, const Thresholds& thresholds);

struct SweepOptions {
  MetricKind metric = MetricKind::kDataMismatch;
  Thresholds thresholds;
  std::optional<double> normalization;
  EvaluationRows where;
  /// Ground truth per environment; defaults to lax_hopf_truth(profile, grid).
  TruthProvider truth;
};

/// One row per free-flow speed (ascending), every other parameter taken
/// from `training_env`.
CertificationReport certification_sweep(const DensityEstimator& model,
                                        const Environment& training_env,
                                        std::vector<double> v_f_list, const Grid& grid,
                                        const PiecewiseConstantProfile& profile,
                                        const SweepOptions& options = {});

/// 2,000 Adam + 5,000 L-BFGS on top of `base`.
TrainConfig default_refine_budget(TrainConfig base);

/// Warm-started training on old and new samples together.
std::pair<MlpParams<double>, TrainReport> refine(const MlpParams<double>& model,
                                                 const SampleSet& old_samples,
                                                 const SampleSet& new_samples,
                                                 const TrainConfig& budget);

/// `v_f,raw_loss,npl,category,bound_violation_rate` with `#` header comments.
void write_report_csv(std::ostream& out, const CertificationReport& report);
/// Environments as columns, then NPL and category rows.
void write_report_table(std::ostream& out, const CertificationReport& report);

}  // namespace tse

#endif  // TSE_CERTIFICATION_HPP
