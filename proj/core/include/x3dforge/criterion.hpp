#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "x3dforge/arch.hpp"
#include "x3dforge/tensor.hpp"

namespace x3df {

// ---- Analytic oracle -----------------------------------------------------

/// Saturating per-axis goodness: J = sum_a w_a * (1 - E_a^-beta_a) over the
/// cumulative magnitudes. Weights sum to 1, so J lies in [0, 1).
struct AnalyticParams {
  // Indexed by Axis: fast, temporal, spatial, width, bottleneck, depth.
  std::array<double, 6> weights = {1.0 / 6, 1.0 / 6, 1.0 / 6,
                                   1.0 / 6, 1.0 / 6, 1.0 / 6};
  std::array<double, 6> exponents = {0.7, 0.9, 0.8, 0.5, 1.0, 0.4};
};

std::vector<std::string> validate_analytic(const AnalyticParams& params);

double analytic_oracle(const ExpansionFactors& factors,
                       const AnalyticParams& params);

// ---- Synthetic spatiotemporal dataset -------------------------------------

/// Oriented moving bars; classes pair up so that members of a pair share
/// direction and spatial frequency and differ only in drift speed, which
/// makes the labels partially invisible to any single-frame model.
struct SyntheticDatasetSpec {
  int num_classes = 8;
  int train_per_class = 32;
  int test_per_class = 16;
  int frames = 4;       // clip geometry T x S^2
  int resolution = 112;
  double noise_level = 0.1;
  double drift_speed = 2.0;       // px per frame for the moving class of a pair
  double base_frequency = 0.055;  // cycles per px of the bar pattern
};

std::vector<std::string> validate_dataset_spec(const SyntheticDatasetSpec& ds);

struct LabeledClips {
  std::vector<Tensor5> clips;  // each {1, 3, T, S, S}
  std::vector<int> labels;
};

struct SyntheticDataset {
  LabeledClips train;
  LabeledClips test;
};

/// One clip, reproducible from (seed, split, class, index) alone; the
/// full dataset is the concatenation of these in index order.
Tensor5 synthetic_clip(const SyntheticDatasetSpec& ds, std::uint64_t seed,
                       int split, int label, int index);

SyntheticDataset generate_dataset(const SyntheticDatasetSpec& ds,
                                  std::uint64_t seed);

// ---- Ridge readout ---------------------------------------------------------

/// Row-major dense double matrix, just large enough for the readout math.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

/// Solves (X^T X + lambda I) W = X^T Y by Cholesky; X is n x d, Y is n x k,
/// W is d x k.
Matrix ridge_solve(const Matrix& x, const Matrix& y, double lambda);

/// Standardizes with train statistics, fits the one-vs-all ridge readout
/// and scores argmax predictions on the test rows. All-zero-variance
/// features fall back to chance level.
double ridge_readout_accuracy(const Matrix& train_x,
                              const std::vector<int>& train_labels,
                              const Matrix& test_x,
                              const std::vector<int>& test_labels,
                              int num_classes, double lambda);

// ---- Random-feature evaluator ----------------------------------------------

struct RandomFeatureParams {
  SyntheticDatasetSpec dataset;  // frames/resolution are matched per factors
  double lambda = 1e-2;
  std::uint64_t weight_seed = 1;
  std::uint64_t data_seed = 1;
  std::int64_t activation_budget = 200'000'000;  // conv activation elements
  int threads = 1;
};

/// Instantiates the factors, extracts pooled random-network features for a
/// matched synthetic dataset, fits a one-vs-all ridge readout on the train
/// split and reports test accuracy. Fully deterministic given the seeds.
/// Degenerate (zero-variance) features score chance level. Throws
/// CriterionError when the activation budget is exceeded.
double random_feature_eval(const ExpansionFactors& factors,
                           const ArchConfig& config,
                           const RandomFeatureParams& params);

// Feature extraction over materialized clips, for feature-space
// experiments and tests; random_feature_eval itself streams clips.
struct WeightBundle;
Matrix features_matrix(const ArchSpec& spec, const WeightBundle& weights,
                       const LabeledClips& clips, int threads);

// ---- Replay table -----------------------------------------------------------

/// Exact-match score lookup keyed by the six factors canonicalized to six
/// decimal places. Never interpolates.
class ReplayTable {
 public:
  static ReplayTable from_csv_text(const std::string& text);
  static ReplayTable load(const std::string& path);

  static std::string canonical_key(const ExpansionFactors& factors);

  double lookup(const ExpansionFactors& factors) const;
  std::size_t size() const { return scores_.size(); }

 private:
  std::map<std::string, double> scores_;
};

// ---- Pluggable criterion ----------------------------------------------------

enum class CriterionVariant { kAnalytic, kReplay, kRandomFeature };

std::string_view criterion_variant_name(CriterionVariant variant);

/// Which scoring oracle to use, its parameters, and its seed.
struct CriterionSpec {
  CriterionVariant variant = CriterionVariant::kAnalytic;
  std::uint64_t seed = 1;
  AnalyticParams analytic;
  std::string table_path;              // replay
  RandomFeatureParams random_feature;  // seeds derived from `seed` when unset
};

/// A goodness function J over expansion factors. Implementations are pure
/// given their construction parameters and safe to call concurrently.
class Criterion {
 public:
  virtual ~Criterion() = default;
  virtual double evaluate(const ExpansionFactors& factors) const = 0;
  virtual std::string id() const = 0;
};

std::unique_ptr<Criterion> make_criterion(const CriterionSpec& spec,
                                          const ArchConfig& config);

}  // namespace x3df
