#pragma once

// Specialized predictors P[k,j]: a row-level probabilistic classifier per
// (component, class) pair plus program-level decision thresholds. A program
// is flagged when the share of malicious-looking rows reaches the
// class-specific threshold theta, calibrated on validation data to the
// class's user requirement (high TPR or low FPR).

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sundew/datagen.hpp"
#include "sundew/domain.hpp"
#include "sundew/gbt.hpp"

namespace sundew {

struct Hyperparams {
  int rounds = 50;
  int max_depth = 3;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  int top_features = 0;  // 0 keeps every column; >0 selects by split gain
  double high_tpr_fpr_cap = 0.15;
  double low_fpr_fpr_cap = 0.05;

  gbt::TrainOptions to_train_options() const {
    gbt::TrainOptions opt;
    opt.rounds = rounds;
    opt.max_depth = max_depth;
    opt.learning_rate = learning_rate;
    opt.seed = seed;
    return opt;
  }
};

struct RowClassifier {
  gbt::BinaryGbt model;
  std::vector<int> feature_columns;   // indices into the component schema
  std::uint64_t full_schema_hash = 0; // schema the columns index into
  Component component = Component::Network;
};

// Probability of each snapshot being malicious.
inline std::vector<double> predict_rows(const RowClassifier& c, const SnapshotMatrix& m) {
  if (schema_hash(m.component, m.column_names) != c.full_schema_hash)
    throw std::invalid_argument("snapshot schema does not match trained classifier");
  std::vector<double> probs(m.features.rows);
  std::vector<double> selected(c.feature_columns.size());
  for (std::size_t r = 0; r < m.features.rows; ++r) {
    const auto row = m.features.row(r);
    for (std::size_t i = 0; i < c.feature_columns.size(); ++i)
      selected[i] = row[static_cast<std::size_t>(c.feature_columns[i])];
    probs[r] = c.model.predict_probability(selected);
  }
  return probs;
}

inline Statistics program_statistics(const std::vector<double>& row_probs,
                                     double row_prob_cutoff) {
  if (row_probs.empty()) throw std::invalid_argument("empty row probability vector");
  double sum = 0.0;
  std::size_t malicious = 0;
  for (double p : row_probs) {
    sum += p;
    if (p > row_prob_cutoff) ++malicious;
  }
  Statistics s;
  s.probability_estimate = sum / static_cast<double>(row_probs.size());
  s.malicious_row_percentage =
      static_cast<double>(malicious) / static_cast<double>(row_probs.size());
  return s;
}

struct CalibrationResult {
  double row_prob_cutoff = 0.5;
  double row_percentage_threshold = 0.5;
  bool degenerate = false;   // no grid point beats chance; defaults returned
  bool infeasible = false;   // FPR cap unattainable; max-F1 fallback used
  double validation_f1 = 0.0;
  double validation_tpr = 0.0;
  double validation_fpr = 0.0;
};

struct SpecializedPredictor {
  Component component = Component::Network;
  MalwareClass target_class = MalwareClass::Cryptominer;
  Requirement requirement = Requirement::HighTPR;
  RowClassifier row_classifier;
  double row_prob_cutoff = 0.5;
  double row_percentage_threshold = 0.5;  // theta
  CalibrationResult calibration;

  const std::vector<int>& feature_columns() const { return row_classifier.feature_columns; }
};

inline PredictionTuple predict_program(const SpecializedPredictor& p,
                                       const SnapshotMatrix& d) {
  const std::vector<double> probs = predict_rows(p.row_classifier, d);
  PredictionTuple out;
  out.stats = program_statistics(probs, p.row_prob_cutoff);
  out.label = out.stats.malicious_row_percentage >= p.row_percentage_threshold ? 1 : 0;
  return out;
}

namespace detail {

inline double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  const double denom = static_cast<double>(2 * tp + fp + fn);
  return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
}

// Collect programs of the target class and benign programs, in dataset order.
inline void gather_specialization_slice(const Dataset& ds, MalwareClass target,
                                        std::vector<const Program*>& positives,
                                        std::vector<const Program*>& negatives) {
  positives.clear();
  negatives.clear();
  for (const Program& p : ds.programs) {
    if (p.true_class.is_benign())
      negatives.push_back(&p);
    else if (p.true_class.malware_class() == target)
      positives.push_back(&p);
  }
}

}  // namespace detail

// Grid-search the (row cutoff, theta) pair on validation programs of the
// specialization class versus benign. High-TPR classes maximize TPR under an
// FPR cap, preferring the loosest theta; low-FPR classes maximize F1 under a
// tighter cap, preferring the strictest theta. Falls back to unconstrained
// max F1 when the cap is unattainable, and to (0.5, 0.5) when nothing on the
// grid beats chance.
inline CalibrationResult calibrate_thresholds(const RowClassifier& classifier,
                                              const Dataset& validate,
                                              MalwareClass target_class,
                                              Requirement requirement,
                                              double high_tpr_fpr_cap = 0.15,
                                              double low_fpr_fpr_cap = 0.05) {
  std::vector<const Program*> positives, negatives;
  detail::gather_specialization_slice(validate, target_class, positives, negatives);
  if (positives.empty() || negatives.empty())
    throw std::invalid_argument("validation split lacks the target class or benign data");

  static constexpr std::array<double, 5> kCutoffGrid = {0.3, 0.4, 0.5, 0.6, 0.7};
  constexpr int kThetaSteps = 20;  // theta = i / 20 for i in [0, 20]

  // Malicious-row share per program per cutoff, computed once.
  const std::size_t program_count = positives.size() + negatives.size();
  std::vector<std::array<double, kCutoffGrid.size()>> shares(program_count);
  std::vector<bool> is_positive(program_count);
  {
    std::size_t idx = 0;
    for (const auto* group : {&positives, &negatives}) {
      for (const Program* p : *group) {
        const std::vector<double> probs =
            predict_rows(classifier, p->component_data(classifier.component));
        for (std::size_t ci = 0; ci < kCutoffGrid.size(); ++ci)
          shares[idx][ci] = program_statistics(probs, kCutoffGrid[ci]).malicious_row_percentage;
        is_positive[idx] = group == &positives;
        ++idx;
      }
    }
  }

  struct Candidate {
    double cutoff, theta, tpr, fpr, f1;
  };
  std::vector<Candidate> grid;
  grid.reserve(kCutoffGrid.size() * (kThetaSteps + 1));
  for (std::size_t ci = 0; ci < kCutoffGrid.size(); ++ci) {
    for (int ti = 0; ti <= kThetaSteps; ++ti) {
      const double theta = static_cast<double>(ti) / kThetaSteps;
      std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
      for (std::size_t i = 0; i < program_count; ++i) {
        const bool flagged = shares[i][ci] >= theta;
        if (is_positive[i])
          (flagged ? tp : fn)++;
        else
          (flagged ? fp : tn)++;
      }
      Candidate c;
      c.cutoff = kCutoffGrid[ci];
      c.theta = theta;
      c.tpr = static_cast<double>(tp) / static_cast<double>(positives.size());
      c.fpr = static_cast<double>(fp) / static_cast<double>(negatives.size());
      c.f1 = detail::f1_from_counts(tp, fp, fn);
      grid.push_back(c);
    }
  }

  const bool high_tpr = requirement == Requirement::HighTPR;
  const double fpr_cap = high_tpr ? high_tpr_fpr_cap : low_fpr_fpr_cap;

  // Tie order: objective, then theta in the requirement's direction, then
  // cutoff nearest 0.5, then smaller cutoff.
  const auto better = [&](const Candidate& a, const Candidate& b, bool use_f1) {
    const double oa = use_f1 ? a.f1 : a.tpr;
    const double ob = use_f1 ? b.f1 : b.tpr;
    if (std::abs(oa - ob) > 1e-12) return oa > ob;
    if (std::abs(a.theta - b.theta) > 1e-12)
      return high_tpr ? a.theta < b.theta : a.theta > b.theta;
    const double da = std::abs(a.cutoff - 0.5), db = std::abs(b.cutoff - 0.5);
    if (std::abs(da - db) > 1e-12) return da < db;
    return a.cutoff < b.cutoff;
  };

  double best_separation = 0.0;
  for (const Candidate& c : grid) best_separation = std::max(best_separation, c.tpr - c.fpr);

  CalibrationResult result;
  const Candidate* chosen = nullptr;
  if (best_separation < 0.1) {
    result.degenerate = true;
    for (const Candidate& c : grid)
      if (std::abs(c.cutoff - 0.5) < 1e-12 && std::abs(c.theta - 0.5) < 1e-12) chosen = &c;
  } else {
    const bool objective_is_f1 = !high_tpr;
    for (const Candidate& c : grid) {
      if (c.fpr > fpr_cap + 1e-12) continue;
      if (!chosen || better(c, *chosen, objective_is_f1)) chosen = &c;
    }
    if (!chosen) {
      result.infeasible = true;
      for (const Candidate& c : grid)
        if (!chosen || better(c, *chosen, /*use_f1=*/true)) chosen = &c;
    }
  }

  result.row_prob_cutoff = chosen->cutoff;
  result.row_percentage_threshold = chosen->theta;
  result.validation_f1 = chosen->f1;
  result.validation_tpr = chosen->tpr;
  result.validation_fpr = chosen->fpr;
  return result;
}

// Fit the row classifier on rows of the target class and benign programs
// only, then calibrate thresholds on the validation split. The returned
// predictor is frozen.
inline SpecializedPredictor train_specialized(const Dataset& train,
                                              const Dataset& validate,
                                              Component k, MalwareClass j,
                                              Requirement requirement,
                                              const Hyperparams& hp = {}) {
  std::vector<const Program*> positives, negatives;
  detail::gather_specialization_slice(train, j, positives, negatives);
  if (positives.empty())
    throw std::invalid_argument(std::string("class ") + to_string(j) +
                                " absent from training data");
  if (negatives.empty())
    throw std::invalid_argument("training data lacks benign programs");

  // Labeled-provenance check: the training slice may contain only the
  // specialization class and benign programs.
  for (const auto* group : {&positives, &negatives})
    for (const Program* p : *group)
      if (p->true_class.is_malware() && p->true_class.malware_class() != j)
        throw std::logic_error("foreign class leaked into specialized training slice");

  const std::vector<std::string>& columns = train.schema[index_of(k)];
  const std::size_t num_columns = columns.size();

  std::size_t total_rows = 0;
  for (const auto* group : {&positives, &negatives})
    for (const Program* p : *group) total_rows += p->component_data(k).features.rows;

  Matrix x(total_rows, num_columns);
  std::vector<int> y(total_rows);
  {
    std::size_t out_row = 0;
    for (const auto* group : {&positives, &negatives}) {
      const int label = group == &positives ? 1 : 0;
      for (const Program* p : *group) {
        const Matrix& m = p->component_data(k).features;
        for (std::size_t r = 0; r < m.rows; ++r, ++out_row) {
          std::copy(m.row(r).begin(), m.row(r).end(), x.row(out_row).begin());
          y[out_row] = label;
        }
      }
    }
  }

  gbt::TrainOptions opt = hp.to_train_options();
  opt.seed = detail::mix_seed(detail::mix_seed(hp.seed, index_of(k)), index_of(j));

  std::vector<int> selected(num_columns);
  for (std::size_t i = 0; i < num_columns; ++i) selected[i] = static_cast<int>(i);

  gbt::BinaryGbt model;
  if (hp.top_features > 0 && static_cast<std::size_t>(hp.top_features) < num_columns) {
    // Pilot fit ranks columns by split gain; the final model sees only the top.
    const gbt::BinaryGbt pilot = gbt::BinaryGbt::train(x, y, opt);
    const std::vector<double>& gains = pilot.gain_importance();
    std::stable_sort(selected.begin(), selected.end(), [&](int a, int b) {
      return gains[static_cast<std::size_t>(a)] > gains[static_cast<std::size_t>(b)];
    });
    selected.resize(static_cast<std::size_t>(hp.top_features));
    std::sort(selected.begin(), selected.end());

    Matrix reduced(total_rows, selected.size());
    for (std::size_t r = 0; r < total_rows; ++r)
      for (std::size_t i = 0; i < selected.size(); ++i)
        reduced.at(r, i) = x.at(r, static_cast<std::size_t>(selected[i]));
    model = gbt::BinaryGbt::train(reduced, y, opt);
  } else {
    model = gbt::BinaryGbt::train(x, y, opt);
  }

  SpecializedPredictor predictor;
  predictor.component = k;
  predictor.target_class = j;
  predictor.requirement = requirement;
  predictor.row_classifier.model = std::move(model);
  predictor.row_classifier.feature_columns = std::move(selected);
  predictor.row_classifier.full_schema_hash = schema_hash(k, columns);
  predictor.row_classifier.component = k;
  predictor.calibration =
      calibrate_thresholds(predictor.row_classifier, validate, j, requirement,
                           hp.high_tpr_fpr_cap, hp.low_fpr_fpr_cap);
  predictor.row_prob_cutoff = predictor.calibration.row_prob_cutoff;
  predictor.row_percentage_threshold = predictor.calibration.row_percentage_threshold;
  return predictor;
}

// --- Persistence -----------------------------------------------------------

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json specialized_predictor_to_json(const SpecializedPredictor& p) {
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  j["kind"] = "specialized_predictor";
  j["component"] = to_string(p.component);
  j["target_class"] = to_string(p.target_class);
  j["requirement"] = to_string(p.requirement);
  j["row_prob_cutoff"] = p.row_prob_cutoff;
  j["row_percentage_threshold"] = p.row_percentage_threshold;
  j["feature_columns"] = p.row_classifier.feature_columns;
  j["schema_hash"] = p.row_classifier.full_schema_hash;
  j["calibration"] = {{"degenerate", p.calibration.degenerate},
                      {"infeasible", p.calibration.infeasible},
                      {"validation_f1", p.calibration.validation_f1},
                      {"validation_tpr", p.calibration.validation_tpr},
                      {"validation_fpr", p.calibration.validation_fpr}};
  j["model"] = p.row_classifier.model.to_json();
  return j;
}

inline SpecializedPredictor specialized_predictor_from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != kModelFormatVersion)
    throw std::runtime_error("unsupported model format version");
  if (j.at("kind") != "specialized_predictor")
    throw std::runtime_error("not a specialized predictor document");
  SpecializedPredictor p;
  p.component = component_from_string(j.at("component"));
  p.target_class = malware_class_from_string(j.at("target_class"));
  p.requirement = requirement_from_string(j.at("requirement"));
  p.row_prob_cutoff = j.at("row_prob_cutoff").get<double>();
  p.row_percentage_threshold = j.at("row_percentage_threshold").get<double>();
  p.row_classifier.feature_columns = j.at("feature_columns").get<std::vector<int>>();
  p.row_classifier.full_schema_hash = j.at("schema_hash").get<std::uint64_t>();
  p.row_classifier.component = p.component;
  p.row_classifier.model = gbt::BinaryGbt::from_json(j.at("model"));
  const auto& cal = j.at("calibration");
  p.calibration.degenerate = cal.at("degenerate").get<bool>();
  p.calibration.infeasible = cal.at("infeasible").get<bool>();
  p.calibration.validation_f1 = cal.at("validation_f1").get<double>();
  p.calibration.validation_tpr = cal.at("validation_tpr").get<double>();
  p.calibration.validation_fpr = cal.at("validation_fpr").get<double>();
  p.calibration.row_prob_cutoff = p.row_prob_cutoff;
  p.calibration.row_percentage_threshold = p.row_percentage_threshold;
  return p;
}

}  // namespace sundew
