#include "x3dforge/criterion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "x3dforge/cost.hpp"
#include "x3dforge/engine.hpp"
#include "x3dforge/errors.hpp"
#include "x3dforge/parallel.hpp"
#include "x3dforge/rng.hpp"

namespace x3df {

namespace {

double gaussian(Rng& rng) {
  // Box-Muller on explicit uniforms; u1 in (0, 1].
  const double u1 =
      (static_cast<double>(rng.next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = rng.next_unit();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

struct Motif {
  double angle;
  double speed;
  double frequency;
};

Motif class_motif(const SyntheticDatasetSpec& ds, int label) {
  // Pairs (2g, 2g+1) share orientation and frequency; the odd member
  // drifts, the even one is static.
  const int group = label / 2;
  const int num_groups = (ds.num_classes + 1) / 2;
  Motif m;
  m.angle = 3.14159265358979323846 * group / std::max(1, num_groups);
  m.speed = (label % 2 == 1) ? ds.drift_speed : 0.0;
  m.frequency = ds.base_frequency * (1.0 + 0.35 * (group % 2));
  return m;
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) {
      field.erase(field.begin());
    }
    while (!field.empty() && (field.back() == ' ' || field.back() == '\r' ||
                              field.back() == '\t')) {
      field.pop_back();
    }
    out.push_back(field);
  }
  return out;
}

}  // namespace

std::vector<std::string> validate_analytic(const AnalyticParams& params) {
  std::vector<std::string> out;
  double sum = 0.0;
  for (double w : params.weights) {
    if (w < 0.0) out.push_back("analytic weights must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    out.push_back("analytic weights must sum to 1");
  }
  for (double b : params.exponents) {
    if (!(b > 0.0)) out.push_back("analytic exponents must be > 0");
  }
  return out;
}

double analytic_oracle(const ExpansionFactors& factors,
                       const AnalyticParams& params) {
  double score = 0.0;
  for (Axis axis : kAllAxes) {
    const int i = static_cast<int>(axis);
    const double magnitude = factors.cumulative[i];
    score += params.weights[i] *
             (1.0 - std::pow(magnitude, -params.exponents[i]));
  }
  return score;
}

std::vector<std::string> validate_dataset_spec(const SyntheticDatasetSpec& ds) {
  std::vector<std::string> out;
  if (ds.num_classes < 2) out.push_back("num_classes must be >= 2");
  if (ds.train_per_class < 1) out.push_back("train_per_class must be >= 1");
  if (ds.test_per_class < 1) out.push_back("test_per_class must be >= 1");
  if (ds.frames < 1) out.push_back("frames must be >= 1");
  if (ds.resolution < 1) out.push_back("resolution must be >= 1");
  if (ds.noise_level < 0.0) out.push_back("noise_level must be >= 0");
  if (ds.base_frequency <= 0.0) out.push_back("base_frequency must be > 0");
  return out;
}

Tensor5 synthetic_clip(const SyntheticDatasetSpec& ds, std::uint64_t seed,
                       int split, int label, int index) {
  if (auto bad = validate_dataset_spec(ds); !bad.empty()) {
    throw ValidationError("invalid dataset spec: " + bad.front());
  }
  const Motif motif = class_motif(ds, label);
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(split) + 1,
                   static_cast<std::uint64_t>(label),
                   static_cast<std::uint64_t>(index)));
  const double phase = rng.next_unit() * 2.0 * 3.14159265358979323846;
  const double ca = std::cos(motif.angle);
  const double sa = std::sin(motif.angle);
  constexpr double kChannelGain[3] = {1.0, 0.8, 0.6};

  Tensor5 clip(1, 3, ds.frames, ds.resolution, ds.resolution);
  for (int t = 0; t < ds.frames; ++t) {
    const double shift = motif.speed * t;
    for (int y = 0; y < ds.resolution; ++y) {
      for (int x = 0; x < ds.resolution; ++x) {
        const double u = x * ca + y * sa - shift;
        const double s = std::tanh(
            4.0 * std::cos(2.0 * 3.14159265358979323846 * motif.frequency * u +
                           phase));
        for (int c = 0; c < 3; ++c) {
          clip.at(0, c, t, y, x) = static_cast<float>(
              kChannelGain[c] * s + ds.noise_level * gaussian(rng));
        }
      }
    }
  }
  return clip;
}

SyntheticDataset generate_dataset(const SyntheticDatasetSpec& ds,
                                  std::uint64_t seed) {
  SyntheticDataset data;
  for (int split = 0; split < 2; ++split) {
    LabeledClips& out = split == 0 ? data.train : data.test;
    const int per_class = split == 0 ? ds.train_per_class : ds.test_per_class;
    for (int label = 0; label < ds.num_classes; ++label) {
      for (int index = 0; index < per_class; ++index) {
        out.clips.push_back(synthetic_clip(ds, seed, split, label, index));
        out.labels.push_back(label);
      }
    }
  }
  return data;
}

Matrix ridge_solve(const Matrix& x, const Matrix& y, double lambda) {
  if (x.rows != y.rows) {
    throw ValidationError("ridge_solve: row count mismatch");
  }
  if (!(lambda > 0.0)) throw ValidationError("ridge_solve: lambda must be > 0");
  const int n = x.rows;
  const int d = x.cols;
  const int k = y.cols;

  Matrix gram(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      double acc = 0.0;
      for (int r = 0; r < n; ++r) acc += x.at(r, i) * x.at(r, j);
      gram.at(i, j) = acc;
      gram.at(j, i) = acc;
    }
    gram.at(i, i) += lambda;
  }
  Matrix rhs(d, k);
  for (int i = 0; i < d; ++i) {
    for (int c = 0; c < k; ++c) {
      double acc = 0.0;
      for (int r = 0; r < n; ++r) acc += x.at(r, i) * y.at(r, c);
      rhs.at(i, c) = acc;
    }
  }

  // Cholesky: gram = L L^T.
  Matrix l(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) {
      double acc = gram.at(i, j);
      for (int p = 0; p < j; ++p) acc -= l.at(i, p) * l.at(j, p);
      if (i == j) {
        if (acc <= 0.0) {
          throw CriterionError("ridge system is not positive definite");
        }
        l.at(i, i) = std::sqrt(acc);
      } else {
        l.at(i, j) = acc / l.at(j, j);
      }
    }
  }
  // Solve L z = rhs, then L^T w = z.
  Matrix w(d, k);
  for (int c = 0; c < k; ++c) {
    std::vector<double> z(d);
    for (int i = 0; i < d; ++i) {
      double acc = rhs.at(i, c);
      for (int p = 0; p < i; ++p) acc -= l.at(i, p) * z[p];
      z[i] = acc / l.at(i, i);
    }
    for (int i = d - 1; i >= 0; --i) {
      double acc = z[i];
      for (int p = i + 1; p < d; ++p) acc -= l.at(p, i) * w.at(p, c);
      w.at(i, c) = acc / l.at(i, i);
    }
  }
  return w;
}

namespace {

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;
  bool degenerate = false;  // every dimension has zero variance

  static Standardizer fit(const Matrix& x) {
    Standardizer s;
    const int n = x.rows;
    const int d = x.cols;
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 1.0);
    int live = 0;
    for (int j = 0; j < d; ++j) {
      double m = 0.0;
      for (int r = 0; r < n; ++r) m += x.at(r, j);
      m /= n;
      double var = 0.0;
      for (int r = 0; r < n; ++r) {
        const double dlt = x.at(r, j) - m;
        var += dlt * dlt;
      }
      var /= n;
      s.mean[j] = m;
      if (var > 1e-12) {
        s.scale[j] = 1.0 / std::sqrt(var);
        ++live;
      } else {
        s.scale[j] = 1.0;
      }
    }
    s.degenerate = live == 0;
    return s;
  }

  void apply(Matrix& x) const {
    for (int r = 0; r < x.rows; ++r) {
      for (int j = 0; j < x.cols; ++j) {
        x.at(r, j) = (x.at(r, j) - mean[j]) * scale[j];
      }
    }
  }
};

Matrix one_vs_all_targets(const std::vector<int>& labels, int num_classes) {
  Matrix y(static_cast<int>(labels.size()), num_classes);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    for (int c = 0; c < num_classes; ++c) {
      y.at(static_cast<int>(r), c) = labels[r] == c ? 1.0 : -1.0;
    }
  }
  return y;
}

double readout_accuracy(Matrix train_x, const std::vector<int>& train_labels,
                        Matrix test_x, const std::vector<int>& test_labels,
                        int num_classes, double lambda) {
  const Standardizer stats = Standardizer::fit(train_x);
  if (stats.degenerate) return 1.0 / num_classes;
  stats.apply(train_x);
  stats.apply(test_x);
  const Matrix w =
      ridge_solve(train_x, one_vs_all_targets(train_labels, num_classes),
                  lambda);
  int hits = 0;
  for (int r = 0; r < test_x.rows; ++r) {
    int best = 0;
    double best_score = -1e300;
    for (int c = 0; c < num_classes; ++c) {
      double acc = 0.0;
      for (int j = 0; j < test_x.cols; ++j) {
        acc += test_x.at(r, j) * w.at(j, c);
      }
      if (acc > best_score) {
        best_score = acc;
        best = c;
      }
    }
    if (best == test_labels[r]) ++hits;
  }
  return static_cast<double>(hits) / test_x.rows;
}

}  // namespace

double random_feature_eval(const ExpansionFactors& factors,
                           const ArchConfig& config,
                           const RandomFeatureParams& params) {
  if (!(params.lambda > 0.0)) {
    throw ValidationError("random_feature lambda must be > 0");
  }
  ArchSpec spec;
  try {
    spec = instantiate(factors, config);
  } catch (const ValidationError& e) {
    throw CriterionError(std::string("cannot instantiate factors: ") +
                         e.what());
  }
  const std::int64_t footprint = activation_elements(spec);
  if (footprint > params.activation_budget) {
    throw CriterionError("activation budget exceeded: " +
                         std::to_string(footprint) + " > " +
                         std::to_string(params.activation_budget));
  }

  SyntheticDatasetSpec ds = params.dataset;
  ds.frames = spec.input.frames;
  ds.resolution = spec.input.resolution;
  if (auto bad = validate_dataset_spec(ds); !bad.empty()) {
    throw CriterionError("invalid dataset spec: " + bad.front());
  }

  const WeightBundle weights = init_weights(spec, params.weight_seed);
  const int d = spec.head.conv5_width;

  // Clips are generated per worker from (seed, split, class, index), so
  // nothing larger than one clip plus its activations is ever resident.
  auto extract = [&](int split, int per_class, Matrix& out,
                     std::vector<int>& labels) {
    const int rows = ds.num_classes * per_class;
    out = Matrix(rows, d);
    labels.assign(rows, 0);
    parallel_for(rows, params.threads, [&](std::int64_t row) {
      const int label = static_cast<int>(row) / per_class;
      const int index = static_cast<int>(row) % per_class;
      const Tensor5 clip =
          synthetic_clip(ds, params.data_seed, split, label, index);
      const Tensor5 feat = features(spec, weights, clip, EngineOptions{1});
      for (int j = 0; j < d; ++j) {
        out.at(static_cast<int>(row), j) = feat.at(0, j, 0, 0, 0);
      }
      labels[row] = label;
    });
  };

  Matrix train_x, test_x;
  std::vector<int> train_labels, test_labels;
  extract(0, ds.train_per_class, train_x, train_labels);
  extract(1, ds.test_per_class, test_x, test_labels);
  return readout_accuracy(std::move(train_x), train_labels, std::move(test_x),
                          test_labels, ds.num_classes, params.lambda);
}

Matrix features_matrix(const ArchSpec& spec, const WeightBundle& weights,
                       const LabeledClips& clips, int threads) {
  const int d = spec.head.conv5_width;
  Matrix out(static_cast<int>(clips.clips.size()), d);
  parallel_for(static_cast<std::int64_t>(clips.clips.size()), threads,
               [&](std::int64_t row) {
    const Tensor5 feat =
        features(spec, weights, clips.clips[row], EngineOptions{1});
    for (int j = 0; j < d; ++j) {
      out.at(static_cast<int>(row), j) = feat.at(0, j, 0, 0, 0);
    }
  });
  return out;
}

double ridge_readout_accuracy(const Matrix& train_x,
                              const std::vector<int>& train_labels,
                              const Matrix& test_x,
                              const std::vector<int>& test_labels,
                              int num_classes, double lambda) {
  return readout_accuracy(train_x, train_labels, test_x, test_labels,
                          num_classes, lambda);
}

ReplayTable ReplayTable::from_csv_text(const std::string& text) {
  ReplayTable table;
  std::stringstream ss(text);
  std::string line;
  bool header_seen = false;
  while (std::getline(ss, line)) {
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_csv_row(line);
    if (!header_seen) {
      const std::vector<std::string> expected = {
          "gamma_tau", "gamma_t", "gamma_s", "gamma_w",
          "gamma_b",   "gamma_d", "score"};
      if (fields != expected) {
        throw ValidationError(
            "replay table header must be "
            "gamma_tau,gamma_t,gamma_s,gamma_w,gamma_b,gamma_d,score");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 7) {
      throw ValidationError("replay table row must have 7 fields: " + line);
    }
    ExpansionFactors f;
    f.gamma_tau = std::stod(fields[0]);
    f.gamma_t = std::stod(fields[1]);
    f.gamma_s = std::stod(fields[2]);
    f.gamma_w = std::stod(fields[3]);
    f.gamma_b = std::stod(fields[4]);
    f.gamma_d = std::stod(fields[5]);
    const double score = std::stod(fields[6]);
    const std::string key = canonical_key(f);
    if (table.scores_.count(key) != 0) {
      throw ValidationError("replay table has a duplicate key: " + key);
    }
    table.scores_[key] = score;
  }
  if (!header_seen) throw ValidationError("replay table is empty");
  return table;
}

ReplayTable ReplayTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open replay table: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_csv_text(buffer.str());
}

std::string ReplayTable::canonical_key(const ExpansionFactors& f) {
  char buf[192];
  std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", f.gamma_tau,
                f.gamma_t, f.gamma_s, f.gamma_w, f.gamma_b, f.gamma_d);
  return buf;
}

double ReplayTable::lookup(const ExpansionFactors& factors) const {
  const std::string key = canonical_key(factors);
  const auto it = scores_.find(key);
  if (it == scores_.end()) {
    throw CriterionError("replay table has no entry for key " + key);
  }
  return it->second;
}

std::string_view criterion_variant_name(CriterionVariant variant) {
  switch (variant) {
    case CriterionVariant::kAnalytic: return "analytic";
    case CriterionVariant::kReplay: return "replay";
    case CriterionVariant::kRandomFeature: return "random_feature";
  }
  return "?";
}

namespace {

class AnalyticCriterion : public Criterion {
 public:
  explicit AnalyticCriterion(const AnalyticParams& params) : params_(params) {
    if (auto bad = validate_analytic(params); !bad.empty()) {
      throw ValidationError("invalid analytic criterion: " + bad.front());
    }
  }
  double evaluate(const ExpansionFactors& factors) const override {
    return analytic_oracle(factors, params_);
  }
  std::string id() const override { return "analytic"; }

 private:
  AnalyticParams params_;
};

class ReplayCriterion : public Criterion {
 public:
  explicit ReplayCriterion(const std::string& path)
      : table_(ReplayTable::load(path)), path_(path) {}
  double evaluate(const ExpansionFactors& factors) const override {
    return table_.lookup(factors);
  }
  std::string id() const override { return "replay:" + path_; }

 private:
  ReplayTable table_;
  std::string path_;
};

class RandomFeatureCriterion : public Criterion {
 public:
  RandomFeatureCriterion(const RandomFeatureParams& params,
                         const ArchConfig& config, std::uint64_t seed)
      : params_(params), config_(config), seed_(seed) {
    params_.weight_seed = seed;
    params_.data_seed = mix_seed(seed, 1);
  }
  double evaluate(const ExpansionFactors& factors) const override {
    return random_feature_eval(factors, config_, params_);
  }
  std::string id() const override {
    return "random_feature:seed=" + std::to_string(seed_);
  }

 private:
  RandomFeatureParams params_;
  ArchConfig config_;
  std::uint64_t seed_;
};

}  // namespace

std::unique_ptr<Criterion> make_criterion(const CriterionSpec& spec,
                                          const ArchConfig& config) {
  switch (spec.variant) {
    case CriterionVariant::kAnalytic:
      return std::make_unique<AnalyticCriterion>(spec.analytic);
    case CriterionVariant::kReplay:
      if (spec.table_path.empty()) {
        throw ValidationError("replay criterion needs a table path");
      }
      return std::make_unique<ReplayCriterion>(spec.table_path);
    case CriterionVariant::kRandomFeature:
      return std::make_unique<RandomFeatureCriterion>(spec.random_feature,
                                                      config, spec.seed);
  }
  throw ValidationError("unknown criterion variant");
}

}  // namespace x3df
