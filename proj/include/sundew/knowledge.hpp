#pragma once

// Prior knowledge about predictor capability: validation F1 per (component,
// class), the expert sets derived from it, per-prediction strengths, and
// confidence-window statistics over validation probability estimates.

#include <algorithm>
#include <array>
#include <vector>

#include <json.hpp>

#include "sundew/domain.hpp"
#include "sundew/predictor.hpp"

namespace sundew {

using SpecialistGrid =
    std::array<std::array<SpecializedPredictor, kNumClasses>, kNumComponents>;

struct PriorKnowledgeTable {
  std::array<std::array<double, kNumClasses>, kNumComponents> f1 = {};

  double at(Component k, MalwareClass j) const { return f1[index_of(k)][index_of(j)]; }
  double& at(Component k, MalwareClass j) { return f1[index_of(k)][index_of(j)]; }

  double component_mean(Component k) const {
    double sum = 0.0;
    for (double v : f1[index_of(k)]) sum += v;
    return sum / static_cast<double>(kNumClasses);
  }
};

struct ConfidenceWindow {
  double own_q25 = 0.0, own_q75 = 0.0;
  double other_q25 = 0.0, other_q75 = 0.0;
  bool usable = false;  // enough validation programs on both sides
  bool separated = false;

  bool contains_own(double probability_estimate) const {
    return probability_estimate >= own_q25 && probability_estimate <= own_q75;
  }
};

using WindowTable = std::array<std::array<ConfidenceWindow, kNumClasses>, kNumComponents>;

namespace detail {

inline double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace detail

// f1[k][j] = program-level F1 of P[k,j] on validation programs of class j
// versus benign.
inline PriorKnowledgeTable compute_prior_knowledge(const SpecialistGrid& predictors,
                                                   const Dataset& validate) {
  PriorKnowledgeTable table;
  for (Component k : all_components()) {
    for (MalwareClass j : all_classes()) {
      const SpecializedPredictor& p = predictors[index_of(k)][index_of(j)];
      std::size_t tp = 0, fp = 0, fn = 0;
      for (const Program& prog : validate.programs) {
        const bool positive =
            prog.true_class.is_malware() && prog.true_class.malware_class() == j;
        if (!positive && !prog.true_class.is_benign()) continue;
        const int label = predict_program(p, prog.component_data(k)).label;
        if (positive)
          (label == 1 ? tp : fn)++;
        else if (label == 1)
          ++fp;
      }
      if (tp + fn == 0)
        throw std::invalid_argument(std::string("validation split lacks class ") +
                                    to_string(j));
      table.at(k, j) = detail::f1_from_counts(tp, fp, fn);
    }
  }
  return table;
}

// Classes whose prior-known F1 in component k strictly exceeds eta.
inline std::vector<MalwareClass> expert_set(const PriorKnowledgeTable& table,
                                            Component k, double eta) {
  if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("eta must be in [0,1]");
  std::vector<MalwareClass> experts;
  for (MalwareClass j : all_classes())
    if (table.at(k, j) > eta) experts.push_back(j);
  return experts;
}

// Strength of each component for the label it predicted. A malware verdict
// uses that class's prior F1; a benign verdict has no matching predictor, so
// the component's mean F1 stands in as its strength proxy.
inline std::array<double, kNumComponents> strengths_for_predictions(
    const PriorKnowledgeTable& table, const std::array<Label, kNumComponents>& predictions) {
  std::array<double, kNumComponents> strengths = {};
  for (Component k : all_components()) {
    const Label& label = predictions[index_of(k)];
    strengths[index_of(k)] =
        label.is_malware() ? table.at(k, label.malware_class()) : table.component_mean(k);
  }
  return strengths;
}

// Inter-quartile ranges of each predictor's probability estimate on its own
// class versus everything else. A window is separated when the two ranges
// sit at least gamma apart; windows with under four programs on either side
// are unusable and never separated.
inline WindowTable compute_confidence_windows(const SpecialistGrid& predictors,
                                              const Dataset& validate, double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("gamma must be nonnegative");
  WindowTable windows;
  for (Component k : all_components()) {
    for (MalwareClass j : all_classes()) {
      const SpecializedPredictor& p = predictors[index_of(k)][index_of(j)];
      std::vector<double> own, other;
      for (const Program& prog : validate.programs) {
        const double estimate =
            predict_program(p, prog.component_data(k)).stats.probability_estimate;
        const bool is_own =
            prog.true_class.is_malware() && prog.true_class.malware_class() == j;
        (is_own ? own : other).push_back(estimate);
      }
      ConfidenceWindow& w = windows[index_of(k)][index_of(j)];
      if (own.size() < 4 || other.size() < 4) continue;  // stays unusable
      w.usable = true;
      w.own_q25 = detail::quantile(own, 0.25);
      w.own_q75 = detail::quantile(own, 0.75);
      w.other_q25 = detail::quantile(other, 0.25);
      w.other_q75 = detail::quantile(other, 0.75);
      const double gap = std::max(w.own_q25 - w.other_q75, w.other_q25 - w.own_q75);
      w.separated = gap >= gamma;
    }
  }
  return windows;
}

// --- Persistence -----------------------------------------------------------

inline nlohmann::json prior_knowledge_to_json(const PriorKnowledgeTable& table) {
  nlohmann::json j;
  for (Component k : all_components())
    for (MalwareClass c : all_classes())
      j[to_string(k)][to_string(c)] = table.at(k, c);
  return j;
}

inline PriorKnowledgeTable prior_knowledge_from_json(const nlohmann::json& j) {
  PriorKnowledgeTable table;
  for (Component k : all_components())
    for (MalwareClass c : all_classes())
      table.at(k, c) = j.at(to_string(k)).at(to_string(c)).get<double>();
  return table;
}

inline nlohmann::json windows_to_json(const WindowTable& windows) {
  nlohmann::json j;
  for (Component k : all_components()) {
    for (MalwareClass c : all_classes()) {
      const ConfidenceWindow& w = windows[index_of(k)][index_of(c)];
      j[to_string(k)][to_string(c)] = {
          {"own", {w.own_q25, w.own_q75}},
          {"other", {w.other_q25, w.other_q75}},
          {"usable", w.usable},
          {"separated", w.separated}};
    }
  }
  return j;
}

inline WindowTable windows_from_json(const nlohmann::json& j) {
  WindowTable windows;
  for (Component k : all_components()) {
    for (MalwareClass c : all_classes()) {
      const auto& entry = j.at(to_string(k)).at(to_string(c));
      ConfidenceWindow& w = windows[index_of(k)][index_of(c)];
      w.own_q25 = entry.at("own").at(0).get<double>();
      w.own_q75 = entry.at("own").at(1).get<double>();
      w.other_q25 = entry.at("other").at(0).get<double>();
      w.other_q75 = entry.at("other").at(1).get<double>();
      w.usable = entry.at("usable").get<bool>();
      w.separated = entry.at("separated").get<bool>();
    }
  }
  return windows;
}

}  // namespace sundew
