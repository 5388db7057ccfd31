#pragma once

// Synthetic behavioral-trail generation, CSV persistence, temporal
// splitting, and the load-dependent noise model.
//
// Benign snapshots draw from a unit normal per feature. Each malware class
// mean-shifts a class-specific feature subset in a random share of rows, so
// programs mix malicious and benign snapshots and separability is controlled
// per (component, class).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sundew/domain.hpp"

namespace sundew {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

using ClassValueMap = std::array<std::array<double, kNumClasses>, kNumComponents>;

// Mean shift applied to signal features is kShiftScale * delta.
inline constexpr double kShiftScale = 2.0;

// Ordinal structure of the per-(component, class) distinguishability map:
// network separates banker/backdoor/deceptor well, OS separates
// ransomware/spyware, hardware separates ransomware/cryptominer.
inline ClassValueMap default_signal_strength() {
  //              crypto banker spyware backdoor ransom  pua  downld deceptor
  return ClassValueMap{{
      {0.40, 0.85, 0.35, 0.90, 0.40, 0.50, 0.70, 0.80},  // network
      {0.50, 0.45, 0.85, 0.50, 0.85, 0.55, 0.50, 0.40},  // os
      {0.90, 0.35, 0.40, 0.40, 0.85, 0.45, 0.40, 0.35},  // hardware
  }};
}

// Share of genuinely malicious rows per program varies by class.
inline ClassValueMap default_malicious_row_fraction() {
  ClassValueMap rho;
  const std::array<double, kNumClasses> by_class = {0.70, 0.50, 0.45, 0.55,
                                                    0.75, 0.40, 0.50, 0.35};
  for (auto& row : rho) row = by_class;
  return rho;
}

struct GeneratorSpec {
  int programs_per_class = 200;  // per malware class, and again for benign
  std::array<std::pair<int, int>, kNumComponents> rows_per_program = {
      {{40, 120}, {40, 120}, {40, 120}}};
  ClassValueMap signal_strength = default_signal_strength();
  ClassValueMap malicious_row_fraction = default_malicious_row_fraction();
  std::array<int, kNumComponents> signal_feature_count = {8, 4, 8};
  std::array<int, kNumComponents> feature_count = {58, 11, 54};
  double noise_sigma0 = 1.0;
  std::uint64_t seed = 42;

  void validate() const {
    if (programs_per_class <= 0)
      throw std::invalid_argument("programs_per_class must be positive");
    for (Component k : all_components()) {
      const auto [lo, hi] = rows_per_program[index_of(k)];
      if (lo <= 0 || hi < lo)
        throw std::invalid_argument("rows_per_program range invalid");
      if (feature_count[index_of(k)] <= 0)
        throw std::invalid_argument("feature_count must be positive");
      const int sig = signal_feature_count[index_of(k)];
      if (sig <= 0 || sig > feature_count[index_of(k)])
        throw std::invalid_argument("signal_feature_count out of range");
      for (MalwareClass c : all_classes()) {
        const double delta = signal_strength[index_of(k)][index_of(c)];
        if (delta < 0.0 || delta > 1.0)
          throw std::invalid_argument("signal_strength must be in [0,1]");
        const double rho = malicious_row_fraction[index_of(k)][index_of(c)];
        if (rho <= 0.0 || rho > 1.0)
          throw std::invalid_argument("malicious_row_fraction must be in (0,1]");
      }
    }
    if (noise_sigma0 < 0.0)
      throw std::invalid_argument("noise_sigma0 must be nonnegative");
  }
};

struct Dataset {
  std::vector<Program> programs;
  std::array<std::vector<std::string>, kNumComponents> schema;

  std::map<std::string, int> class_counts() const {
    std::map<std::string, int> counts;
    for (const Program& p : programs) ++counts[to_string(p.true_class)];
    return counts;
  }

  std::uint64_t component_schema_hash(Component k) const {
    return schema_hash(k, schema[index_of(k)]);
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline nlohmann::json generator_spec_to_json(const GeneratorSpec& spec) {
  nlohmann::json j;
  j["programs_per_class"] = spec.programs_per_class;
  for (Component k : all_components()) {
    const std::size_t ki = index_of(k);
    const char* name = to_string(k);
    j["rows_per_program"][name] = {spec.rows_per_program[ki].first,
                                   spec.rows_per_program[ki].second};
    j["signal_feature_count"][name] = spec.signal_feature_count[ki];
    j["feature_count"][name] = spec.feature_count[ki];
    for (MalwareClass c : all_classes()) {
      j["signal_strength"][name][to_string(c)] = spec.signal_strength[ki][index_of(c)];
      j["malicious_row_fraction"][name][to_string(c)] =
          spec.malicious_row_fraction[ki][index_of(c)];
    }
  }
  j["noise_sigma0"] = spec.noise_sigma0;
  j["seed"] = spec.seed;
  return j;
}

inline GeneratorSpec generator_spec_from_json(const nlohmann::json& j) {
  GeneratorSpec spec;
  if (j.contains("programs_per_class"))
    spec.programs_per_class = j["programs_per_class"].get<int>();
  for (Component k : all_components()) {
    const std::size_t ki = index_of(k);
    const char* name = to_string(k);
    if (j.contains("rows_per_program") && j["rows_per_program"].contains(name)) {
      spec.rows_per_program[ki] = {j["rows_per_program"][name].at(0).get<int>(),
                                   j["rows_per_program"][name].at(1).get<int>()};
    }
    if (j.contains("signal_feature_count") && j["signal_feature_count"].contains(name))
      spec.signal_feature_count[ki] = j["signal_feature_count"][name].get<int>();
    if (j.contains("feature_count") && j["feature_count"].contains(name))
      spec.feature_count[ki] = j["feature_count"][name].get<int>();
    for (MalwareClass c : all_classes()) {
      if (j.contains("signal_strength") && j["signal_strength"].contains(name) &&
          j["signal_strength"][name].contains(to_string(c)))
        spec.signal_strength[ki][index_of(c)] =
            j["signal_strength"][name][to_string(c)].get<double>();
      if (j.contains("malicious_row_fraction") &&
          j["malicious_row_fraction"].contains(name) &&
          j["malicious_row_fraction"][name].contains(to_string(c)))
        spec.malicious_row_fraction[ki][index_of(c)] =
            j["malicious_row_fraction"][name][to_string(c)].get<double>();
    }
  }
  if (j.contains("noise_sigma0")) spec.noise_sigma0 = j["noise_sigma0"].get<double>();
  if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
  spec.validate();
  return spec;
}

namespace detail {

// Deterministic, overlapping feature subsets give each class its own
// signature within a component.
inline std::vector<std::size_t> signal_features(const GeneratorSpec& spec,
                                                Component k, MalwareClass c) {
  const std::size_t m = static_cast<std::size_t>(spec.feature_count[index_of(k)]);
  const std::size_t count = static_cast<std::size_t>(spec.signal_feature_count[index_of(k)]);
  std::vector<std::size_t> out(count);
  for (std::size_t t = 0; t < count; ++t)
    out[t] = (index_of(c) * count + t) % m;
  return out;
}

inline std::vector<std::string> component_columns(int feature_count) {
  std::vector<std::string> names(static_cast<std::size_t>(feature_count));
  for (int f = 0; f < feature_count; ++f) names[static_cast<std::size_t>(f)] = "f_" + std::to_string(f);
  return names;
}

}  // namespace detail

inline Dataset generate_dataset(const GeneratorSpec& spec) {
  spec.validate();
  Dataset ds;
  for (Component k : all_components())
    ds.schema[index_of(k)] = detail::component_columns(spec.feature_count[index_of(k)]);

  // Labels rotate per timestamp so the temporal split stays class-balanced.
  std::vector<Label> label_cycle;
  label_cycle.push_back(Label::benign());
  for (MalwareClass c : all_classes()) label_cycle.push_back(Label::of(c));

  std::int64_t timestamp = 0;
  for (int i = 0; i < spec.programs_per_class; ++i) {
    for (const Label& label : label_cycle) {
      Program program;
      program.true_class = label;
      program.collected_at = timestamp;
      program.load_at_collection = 0;
      {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "p%06lld_%s",
                      static_cast<long long>(timestamp), to_string(label).c_str());
        program.id = buf;
      }
      std::mt19937_64 rng(detail::mix_seed(spec.seed, static_cast<std::uint64_t>(timestamp)));
      std::normal_distribution<double> unit_normal(0.0, 1.0);
      std::uniform_real_distribution<double> unit_uniform(0.0, 1.0);

      for (Component k : all_components()) {
        const std::size_t ki = index_of(k);
        const auto [lo, hi] = spec.rows_per_program[ki];
        std::uniform_int_distribution<int> row_count_dist(lo, hi);
        const std::size_t rows = static_cast<std::size_t>(row_count_dist(rng));
        const std::size_t cols = static_cast<std::size_t>(spec.feature_count[ki]);

        SnapshotMatrix snap;
        snap.component = k;
        snap.column_names = ds.schema[ki];
        snap.features = Matrix(rows, cols);

        double shift = 0.0;
        double rho = 0.0;
        std::vector<std::size_t> subset;
        if (label.is_malware()) {
          const MalwareClass c = label.malware_class();
          shift = kShiftScale * spec.signal_strength[ki][index_of(c)];
          rho = spec.malicious_row_fraction[ki][index_of(c)];
          subset = detail::signal_features(spec, k, c);
        }

        for (std::size_t r = 0; r < rows; ++r) {
          const bool malicious = label.is_malware() && unit_uniform(rng) < rho;
          for (std::size_t f = 0; f < cols; ++f)
            snap.features.at(r, f) = unit_normal(rng);
          if (malicious)
            for (std::size_t f : subset) snap.features.at(r, f) += shift;
        }
        program.data[ki] = std::move(snap);
      }
      ds.programs.push_back(std::move(program));
      ++timestamp;
    }
  }
  return ds;
}

// --- CSV persistence -------------------------------------------------------
//
// One CSV per component with columns [program_id, class, collected_at, load,
// f_0..f_{m-1}], one row per snapshot, plus a manifest listing the files and
// the schema.

inline void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["programs"] = ds.programs.size();
  for (const auto& [cls, count] : ds.class_counts())
    manifest["class_counts"][cls] = count;

  for (Component k : all_components()) {
    const std::size_t ki = index_of(k);
    const std::string file_name = std::string(to_string(k)) + ".csv";
    manifest["components"][to_string(k)] = {{"file", file_name},
                                            {"columns", ds.schema[ki]}};
    std::ofstream out(dir / file_name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / file_name).string());

    out << "program_id,class,collected_at,load";
    for (const std::string& c : ds.schema[ki]) out << ',' << c;
    out << '\n';
    for (const Program& p : ds.programs) {
      const SnapshotMatrix& snap = p.data[ki];
      for (std::size_t r = 0; r < snap.features.rows; ++r) {
        out << p.id << ',' << to_string(p.true_class) << ',' << p.collected_at
            << ',' << p.load_at_collection;
        for (std::size_t f = 0; f < snap.features.cols; ++f)
          out << ',' << detail::format_double(snap.features.at(r, f));
        out << '\n';
      }
    }
  }

  std::ofstream mf(dir / "manifest.json", std::ios::binary);
  if (!mf) throw std::runtime_error("cannot write manifest.json");
  mf << manifest.dump(2) << '\n';
}

namespace detail {

struct CsvProgramSlice {
  Label label;
  std::int64_t collected_at = 0;
  int load = 0;
  std::vector<double> values;  // row-major
  std::size_t rows = 0;
};

inline void split_csv_line(const std::string& line, std::vector<std::string>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline double parse_cell(const std::string& cell, const std::string& context) {
  std::size_t consumed = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &consumed);
  } catch (const std::exception&) {
    throw std::runtime_error("non-numeric cell '" + cell + "' in " + context);
  }
  if (consumed != cell.size())
    throw std::runtime_error("non-numeric cell '" + cell + "' in " + context);
  return v;
}

}  // namespace detail

inline Dataset load_dataset(const std::filesystem::path& dir) {
  const std::filesystem::path manifest_path = dir / "manifest.json";
  std::ifstream mf(manifest_path);
  if (!mf) throw std::runtime_error("missing manifest: " + manifest_path.string());
  nlohmann::json manifest = nlohmann::json::parse(mf);

  Dataset ds;
  // Program order is the first-seen order in the network file.
  std::vector<std::string> program_order;
  std::array<std::map<std::string, detail::CsvProgramSlice>, kNumComponents> slices;

  for (Component k : all_components()) {
    const std::size_t ki = index_of(k);
    if (!manifest.contains("components") ||
        !manifest["components"].contains(to_string(k)))
      throw std::runtime_error(std::string("manifest missing component ") + to_string(k));
    const auto& entry = manifest["components"][to_string(k)];
    ds.schema[ki] = entry.at("columns").get<std::vector<std::string>>();

    const std::filesystem::path csv_path = dir / entry.at("file").get<std::string>();
    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("missing component file: " + csv_path.string());

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + csv_path.string());
    {
      std::string expected = "program_id,class,collected_at,load";
      for (const std::string& c : ds.schema[ki]) expected += "," + c;
      if (line != expected)
        throw std::runtime_error("schema mismatch in " + csv_path.string());
    }

    std::vector<std::string> cells;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      detail::split_csv_line(line, cells);
      if (cells.size() != 4 + ds.schema[ki].size())
        throw std::runtime_error("schema mismatch at " + csv_path.string() + ":" +
                                 std::to_string(line_no));
      const std::string& id = cells[0];
      detail::CsvProgramSlice& slice = slices[ki][id];
      if (slice.rows == 0) {
        slice.label = label_from_string(cells[1]);
        slice.collected_at = std::stoll(cells[2]);
        slice.load = std::stoi(cells[3]);
        if (k == Component::Network) program_order.push_back(id);
      }
      const std::string context = csv_path.string() + ":" + std::to_string(line_no);
      for (std::size_t f = 0; f < ds.schema[ki].size(); ++f)
        slice.values.push_back(detail::parse_cell(cells[4 + f], context));
      ++slice.rows;
    }
  }

  for (const std::string& id : program_order) {
    Program p;
    p.id = id;
    for (Component k : all_components()) {
      const std::size_t ki = index_of(k);
      auto it = slices[ki].find(id);
      if (it == slices[ki].end())
        throw std::runtime_error("program " + id + " missing from component " +
                                 to_string(k));
      detail::CsvProgramSlice& slice = it->second;
      if (k == Component::Network) {
        p.true_class = slice.label;
        p.collected_at = slice.collected_at;
        p.load_at_collection = slice.load;
      } else if (slice.label != p.true_class || slice.collected_at != p.collected_at) {
        throw std::runtime_error("inconsistent metadata for program " + id);
      }
      SnapshotMatrix snap;
      snap.component = k;
      snap.column_names = ds.schema[ki];
      snap.features.rows = slice.rows;
      snap.features.cols = ds.schema[ki].size();
      snap.features.values = std::move(slice.values);
      p.data[ki] = std::move(snap);
    }
    ds.programs.push_back(std::move(p));
  }
  for (Component k : all_components())
    if (slices[index_of(k)].size() != program_order.size())
      throw std::runtime_error(std::string("component ") + to_string(k) +
                               " lists programs unknown to the network file");
  return ds;
}

// --- Temporal split --------------------------------------------------------

struct SplitResult {
  Dataset train;
  Dataset validate;
  Dataset test;
};

// Orders programs by collection time, cuts train/validate/test so no train
// program postdates any validate/test program, then balances the train set
// by downsampling every label to the scarcest one (earliest kept).
inline SplitResult temporal_split(const Dataset& ds,
                                  std::array<double, 3> ratios = {0.70, 0.15, 0.15}) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("ratios must sum to 1");
  for (double r : ratios)
    if (r < 0.0) throw std::invalid_argument("ratios must be nonnegative");

  std::map<std::string, int> counts = ds.class_counts();
  for (const auto& [cls, count] : counts)
    if (count < 3)
      throw std::invalid_argument("class " + cls + " has fewer than 3 programs");

  std::vector<std::size_t> order(ds.programs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ds.programs[a].collected_at < ds.programs[b].collected_at;
  });

  const std::size_t n = order.size();
  const std::size_t n_train =
      static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
  const std::size_t n_validate =
      static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n)));
  if (n_train + n_validate > n) throw std::invalid_argument("degenerate split sizes");

  SplitResult result;
  result.train.schema = result.validate.schema = result.test.schema = ds.schema;

  std::map<std::string, std::vector<std::size_t>> train_by_class;
  for (std::size_t pos = 0; pos < n; ++pos) {
    const Program& p = ds.programs[order[pos]];
    if (pos < n_train)
      train_by_class[to_string(p.true_class)].push_back(order[pos]);
    else if (pos < n_train + n_validate)
      result.validate.programs.push_back(p);
    else
      result.test.programs.push_back(p);
  }

  std::size_t smallest = n;
  for (const auto& [cls, members] : train_by_class)
    smallest = std::min(smallest, members.size());
  if (train_by_class.empty() || smallest == 0)
    throw std::invalid_argument("train split lost a class entirely");

  std::vector<bool> keep(ds.programs.size(), false);
  for (auto& [cls, members] : train_by_class)
    for (std::size_t i = 0; i < smallest; ++i) keep[members[i]] = true;
  for (std::size_t pos = 0; pos < n_train; ++pos)
    if (keep[order[pos]]) result.train.programs.push_back(ds.programs[order[pos]]);

  return result;
}

// --- Load-noise injection ---------------------------------------------------

// System load perturbs network and hardware trails only: additive noise with
// scale sigma0 * L/10 plus substitution of a load-dependent share of rows by
// benign-distributed ones. OS trails are copied bit-identically.
inline Dataset inject_load_noise(const Dataset& ds, int load,
                                 double noise_sigma0 = 1.0) {
  if (load < 0) throw std::invalid_argument("load must be nonnegative");
  Dataset out = ds;
  for (Program& p : out.programs) p.load_at_collection = load;
  if (load == 0) return out;

  const double sigma = noise_sigma0 * (static_cast<double>(load) / 10.0);
  const double substitution = std::min(0.05 * (static_cast<double>(load) / 10.0), 0.5);

  for (Program& p : out.programs) {
    for (Component k : {Component::Network, Component::Hardware}) {
      Matrix& m = p.data[index_of(k)].features;
      std::mt19937_64 rng(detail::mix_seed(
          detail::mix_seed(fnv1a(p.id), static_cast<std::uint64_t>(load)),
          static_cast<std::uint64_t>(index_of(k))));
      std::normal_distribution<double> unit_normal(0.0, 1.0);

      if (sigma > 0.0)
        for (double& v : m.values) v += sigma * unit_normal(rng);

      const std::size_t replaced =
          static_cast<std::size_t>(std::llround(substitution * static_cast<double>(m.rows)));
      if (replaced > 0) {
        std::vector<std::size_t> rows(m.rows);
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        std::shuffle(rows.begin(), rows.end(), rng);
        for (std::size_t i = 0; i < replaced; ++i)
          for (double& v : m.row(rows[i])) v = unit_normal(rng);
      }
    }
  }
  return out;
}

}  // namespace sundew
