#pragma once

// Core vocabulary shared by every module: malware classes, risk levels,
// data-source components, snapshot matrices, programs, prediction tuples.

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sundew {

// Declaration order is the fixed tie-break order used throughout.
enum class MalwareClass : int {
  Cryptominer = 0,
  Banker,
  Spyware,
  Backdoor,
  Ransomware,
  PUA,
  Downloader,
  Deceptor,
};

inline constexpr int kNumClasses = 8;

inline constexpr std::array<MalwareClass, kNumClasses> all_classes() {
  return {MalwareClass::Cryptominer, MalwareClass::Banker,
          MalwareClass::Spyware,     MalwareClass::Backdoor,
          MalwareClass::Ransomware,  MalwareClass::PUA,
          MalwareClass::Downloader,  MalwareClass::Deceptor};
}

inline const char* to_string(MalwareClass c) {
  switch (c) {
    case MalwareClass::Cryptominer: return "cryptominer";
    case MalwareClass::Banker: return "banker";
    case MalwareClass::Spyware: return "spyware";
    case MalwareClass::Backdoor: return "backdoor";
    case MalwareClass::Ransomware: return "ransomware";
    case MalwareClass::PUA: return "pua";
    case MalwareClass::Downloader: return "downloader";
    case MalwareClass::Deceptor: return "deceptor";
  }
  throw std::logic_error("unknown MalwareClass");
}

inline MalwareClass malware_class_from_string(const std::string& s) {
  for (MalwareClass c : all_classes())
    if (s == to_string(c)) return c;
  throw std::invalid_argument("unknown malware class: " + s);
}

// Benign is a sentinel outside the class set M. A Label is either a malware
// class or benign; benign compares below every malware class on risk.
class Label {
 public:
  Label() = default;
  static Label benign() { return Label{}; }
  static Label of(MalwareClass c) {
    Label l;
    l.cls_ = c;
    return l;
  }

  bool is_benign() const { return !cls_.has_value(); }
  bool is_malware() const { return cls_.has_value(); }
  MalwareClass malware_class() const {
    if (!cls_) throw std::logic_error("benign label has no malware class");
    return *cls_;
  }

  friend bool operator==(const Label&, const Label&) = default;

 private:
  std::optional<MalwareClass> cls_;
};

inline std::string to_string(const Label& l) {
  return l.is_benign() ? "benign" : to_string(l.malware_class());
}

inline Label label_from_string(const std::string& s) {
  if (s == "benign") return Label::benign();
  return Label::of(malware_class_from_string(s));
}

enum class RiskLevel : int { Low = 0, Medium, High, VeryHigh };

enum class Requirement { HighTPR, LowFPR };

inline const char* to_string(RiskLevel r) {
  switch (r) {
    case RiskLevel::Low: return "low";
    case RiskLevel::Medium: return "medium";
    case RiskLevel::High: return "high";
    case RiskLevel::VeryHigh: return "very_high";
  }
  throw std::logic_error("unknown RiskLevel");
}

inline RiskLevel risk_level_from_string(const std::string& s) {
  if (s == "low") return RiskLevel::Low;
  if (s == "medium") return RiskLevel::Medium;
  if (s == "high") return RiskLevel::High;
  if (s == "very_high") return RiskLevel::VeryHigh;
  throw std::invalid_argument("unknown risk level: " + s);
}

inline const char* to_string(Requirement r) {
  return r == Requirement::HighTPR ? "high_tpr" : "low_fpr";
}

inline Requirement requirement_from_string(const std::string& s) {
  if (s == "high_tpr") return Requirement::HighTPR;
  if (s == "low_fpr") return Requirement::LowFPR;
  throw std::invalid_argument("unknown requirement: " + s);
}

struct RiskEntry {
  RiskLevel level;
  Requirement requirement;
  friend bool operator==(const RiskEntry&, const RiskEntry&) = default;
};

using RiskTable = std::map<MalwareClass, RiskEntry>;

inline const RiskTable& default_risk_table() {
  static const RiskTable table = {
      {MalwareClass::Cryptominer, {RiskLevel::High, Requirement::HighTPR}},
      {MalwareClass::Banker, {RiskLevel::High, Requirement::HighTPR}},
      {MalwareClass::Spyware, {RiskLevel::Medium, Requirement::LowFPR}},
      {MalwareClass::Backdoor, {RiskLevel::VeryHigh, Requirement::HighTPR}},
      {MalwareClass::Ransomware, {RiskLevel::VeryHigh, Requirement::HighTPR}},
      {MalwareClass::PUA, {RiskLevel::Low, Requirement::LowFPR}},
      {MalwareClass::Downloader, {RiskLevel::Low, Requirement::LowFPR}},
      {MalwareClass::Deceptor, {RiskLevel::Low, Requirement::LowFPR}},
  };
  return table;
}

// Rank on the extended label space: benign sits below Low.
inline int risk_rank(const Label& l, const RiskTable& table = default_risk_table()) {
  if (l.is_benign()) return 0;
  auto it = table.find(l.malware_class());
  if (it == table.end())
    throw std::invalid_argument("class missing from risk table");
  return 1 + static_cast<int>(it->second.level);
}

// Total preorder on labels by risk. Same-level classes compare equivalent;
// resolving such ties is the caller's concern.
inline std::weak_ordering compare_risk(const Label& a, const Label& b,
                                       const RiskTable& table = default_risk_table()) {
  return risk_rank(a, table) <=> risk_rank(b, table);
}

enum class Component : int { Network = 0, OS = 1, Hardware = 2 };

inline constexpr int kNumComponents = 3;

inline constexpr std::array<Component, kNumComponents> all_components() {
  return {Component::Network, Component::OS, Component::Hardware};
}

inline const char* to_string(Component k) {
  switch (k) {
    case Component::Network: return "network";
    case Component::OS: return "os";
    case Component::Hardware: return "hardware";
  }
  throw std::logic_error("unknown Component");
}

inline Component component_from_string(const std::string& s) {
  for (Component k : all_components())
    if (s == to_string(k)) return k;
  throw std::invalid_argument("unknown component: " + s);
}

inline std::size_t index_of(Component k) { return static_cast<std::size_t>(k); }
inline std::size_t index_of(MalwareClass c) { return static_cast<std::size_t>(c); }

// Dense row-major matrix of snapshot features.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // rows * cols, row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }
  std::span<double> row(std::size_t r) {
    return {values.data() + r * cols, cols};
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// Per-program, per-component feature matrix; rows are behavioral snapshots
// (flows, syscalls, or HPC intervals).
struct SnapshotMatrix {
  Matrix features;
  std::vector<std::string> column_names;
  Component component = Component::Network;

  friend bool operator==(const SnapshotMatrix&, const SnapshotMatrix&) = default;
};

struct Program {
  std::string id;
  Label true_class;
  std::int64_t collected_at = 0;
  int load_at_collection = 0;
  std::array<SnapshotMatrix, kNumComponents> data;  // indexed by Component

  const SnapshotMatrix& component_data(Component k) const { return data[index_of(k)]; }
  SnapshotMatrix& component_data(Component k) { return data[index_of(k)]; }

  friend bool operator==(const Program&, const Program&) = default;
};

// Confidence statistics attached to a specialized prediction.
struct Statistics {
  double probability_estimate = 0.0;     // mean row-level malware probability
  double malicious_row_percentage = 0.0;  // fraction of rows past the cutoff

  friend bool operator==(const Statistics&, const Statistics&) = default;
};

struct PredictionTuple {
  int label = 0;  // 1 = malware of the predictor's specialization class
  Statistics stats;

  friend bool operator==(const PredictionTuple&, const PredictionTuple&) = default;
};

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Identifies a component's feature layout; models refuse data whose schema
// hash differs from the one they were trained on.
inline std::uint64_t schema_hash(Component k, const std::vector<std::string>& columns) {
  std::string joined = to_string(k);
  for (const std::string& c : columns) {
    joined.push_back('\n');
    joined += c;
  }
  return fnv1a(joined);
}

}  // namespace sundew
