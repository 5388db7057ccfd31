#pragma once

// Run configuration: strategy selections, thresholds, seed. A config plus a
// dataset fully determines a run.

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "sundew/domain.hpp"

namespace sundew {

enum class ConsensusStrategy { LogicalOr, Majority, MostConfident, Booster, Multiplexer };
enum class ConfidentSetMetric { Confidence, PriorKnowledge, ConfidenceWindow };
enum class CaStrategy { MostConfident, PriorKnown, Majority };

inline const char* to_string(ConsensusStrategy s) {
  switch (s) {
    case ConsensusStrategy::LogicalOr: return "logical_or";
    case ConsensusStrategy::Majority: return "majority";
    case ConsensusStrategy::MostConfident: return "most_confident";
    case ConsensusStrategy::Booster: return "booster";
    case ConsensusStrategy::Multiplexer: return "multiplexer";
  }
  throw std::logic_error("unknown ConsensusStrategy");
}

inline ConsensusStrategy consensus_strategy_from_string(const std::string& s) {
  if (s == "logical_or") return ConsensusStrategy::LogicalOr;
  if (s == "majority") return ConsensusStrategy::Majority;
  if (s == "most_confident") return ConsensusStrategy::MostConfident;
  if (s == "booster") return ConsensusStrategy::Booster;
  if (s == "multiplexer") return ConsensusStrategy::Multiplexer;
  throw std::invalid_argument("unknown consensus strategy: " + s);
}

inline const char* to_string(ConfidentSetMetric m) {
  switch (m) {
    case ConfidentSetMetric::Confidence: return "confidence";
    case ConfidentSetMetric::PriorKnowledge: return "prior_knowledge";
    case ConfidentSetMetric::ConfidenceWindow: return "confidence_window";
  }
  throw std::logic_error("unknown ConfidentSetMetric");
}

inline ConfidentSetMetric confident_set_metric_from_string(const std::string& s) {
  if (s == "confidence") return ConfidentSetMetric::Confidence;
  if (s == "prior_knowledge") return ConfidentSetMetric::PriorKnowledge;
  if (s == "confidence_window") return ConfidentSetMetric::ConfidenceWindow;
  throw std::invalid_argument("unknown confident-set metric: " + s);
}

inline const char* to_string(CaStrategy s) {
  switch (s) {
    case CaStrategy::MostConfident: return "most_confident";
    case CaStrategy::PriorKnown: return "prior_known";
    case CaStrategy::Majority: return "majority";
  }
  throw std::logic_error("unknown CaStrategy");
}

inline CaStrategy ca_strategy_from_string(const std::string& s) {
  if (s == "most_confident") return CaStrategy::MostConfident;
  if (s == "prior_known") return CaStrategy::PriorKnown;
  if (s == "majority") return CaStrategy::Majority;
  throw std::invalid_argument("unknown ca strategy: " + s);
}

struct EnsembleConfig {
  // Learned consensus resolves per-component conflicts best; the confident-set
  // metrics default to the strongest metric observed per data source.
  std::array<ConsensusStrategy, kNumComponents> consensus_strategy = {
      ConsensusStrategy::Booster, ConsensusStrategy::Booster,
      ConsensusStrategy::Booster};
  std::array<ConfidentSetMetric, kNumComponents> confident_set_metric = {
      ConfidentSetMetric::Confidence, ConfidentSetMetric::PriorKnowledge,
      ConfidentSetMetric::ConfidenceWindow};
  CaStrategy ca_strategy = CaStrategy::PriorKnown;

  double eta = 0.85;   // expert-set threshold on prior-known F1
  int tau = 10;        // system-load cutoff for the OS fallback
  double gamma = 0.05; // confidence-window separation margin
  std::uint64_t seed = 42;

  // An even split of malware/benign votes counts as malware.
  bool majority_tie_is_malware = true;

  std::optional<RiskTable> risk_override;

  const RiskTable& risk_table() const {
    return risk_override ? *risk_override : default_risk_table();
  }

  void validate() const {
    if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("eta must be in [0,1]");
    if (tau < 0) throw std::invalid_argument("tau must be nonnegative");
    if (gamma < 0.0) throw std::invalid_argument("gamma must be nonnegative");
    if (risk_override && risk_override->size() != static_cast<std::size_t>(kNumClasses))
      throw std::invalid_argument("risk override must cover all classes");
  }

  friend bool operator==(const EnsembleConfig&, const EnsembleConfig&) = default;
};

inline nlohmann::json to_json(const EnsembleConfig& cfg) {
  nlohmann::json j;
  for (Component k : all_components()) {
    j["consensus_strategy"][to_string(k)] = to_string(cfg.consensus_strategy[index_of(k)]);
    j["confident_set_metric"][to_string(k)] = to_string(cfg.confident_set_metric[index_of(k)]);
  }
  j["ca_strategy"] = to_string(cfg.ca_strategy);
  j["eta"] = cfg.eta;
  j["tau"] = cfg.tau;
  j["gamma"] = cfg.gamma;
  j["seed"] = cfg.seed;
  j["majority_tie_is_malware"] = cfg.majority_tie_is_malware;
  if (cfg.risk_override) {
    nlohmann::json r;
    for (const auto& [cls, entry] : *cfg.risk_override) {
      r[to_string(cls)] = {{"level", to_string(entry.level)},
                           {"requirement", to_string(entry.requirement)}};
    }
    j["risk_override"] = r;
  }
  return j;
}

inline EnsembleConfig ensemble_config_from_json(const nlohmann::json& j) {
  EnsembleConfig cfg;
  if (j.contains("consensus_strategy"))
    for (Component k : all_components())
      if (j["consensus_strategy"].contains(to_string(k)))
        cfg.consensus_strategy[index_of(k)] =
            consensus_strategy_from_string(j["consensus_strategy"][to_string(k)]);
  if (j.contains("confident_set_metric"))
    for (Component k : all_components())
      if (j["confident_set_metric"].contains(to_string(k)))
        cfg.confident_set_metric[index_of(k)] =
            confident_set_metric_from_string(j["confident_set_metric"][to_string(k)]);
  if (j.contains("ca_strategy")) cfg.ca_strategy = ca_strategy_from_string(j["ca_strategy"]);
  if (j.contains("eta")) cfg.eta = j["eta"].get<double>();
  if (j.contains("tau")) cfg.tau = j["tau"].get<int>();
  if (j.contains("gamma")) cfg.gamma = j["gamma"].get<double>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("majority_tie_is_malware"))
    cfg.majority_tie_is_malware = j["majority_tie_is_malware"].get<bool>();
  if (j.contains("risk_override")) {
    RiskTable table;
    for (const auto& [key, val] : j["risk_override"].items()) {
      table[malware_class_from_string(key)] = {
          risk_level_from_string(val.at("level")),
          requirement_from_string(val.at("requirement"))};
    }
    cfg.risk_override = std::move(table);
  }
  cfg.validate();
  return cfg;
}

// Hash of the canonical config serialization; used to key report files.
inline std::uint64_t config_hash(const EnsembleConfig& cfg) {
  return fnv1a(to_json(cfg).dump());
}

}  // namespace sundew
