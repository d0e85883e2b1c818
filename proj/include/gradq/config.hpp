#pragma once

// Experiment configuration: `key = value` lines, `#` comments. Every key has
// a default; unknown keys and malformed values are all reported together.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gradq/csv.hpp"
#include "gradq/error.hpp"
#include "gradq/flsim.hpp"

namespace gradq {

struct ExperimentConfig {
  std::vector<std::string> arms{"mwl2", "uniform", "fp16", "fp8"};
  std::uint64_t clients = 4;
  std::uint64_t rounds = 10;
  std::vector<double> eta{0.05};
  std::uint64_t batch_size = 32;
  std::uint64_t seed = 1;
  double rate = 2.0;
  std::uint64_t bits = 2;
  double M = 2.0;
  std::string mode = "payload_plus_index";
  std::uint64_t warmup_rounds = 1;
  std::vector<std::uint64_t> widths{64, 32, 10};
  std::string dataset = "synthetic";
  std::uint64_t samples = 2000;
  double separation = 1.0;
  std::uint64_t local_epochs = 1;
  std::string local_mode = "gradient";
  double init_scale = 1.0;
  double train_fraction = 0.8;
  std::string out_dir = "results";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace config {

inline const std::vector<std::string>& known_arms() {
  static const std::vector<std::string> arms{"identity", "mwl2", "mwl2-fixed", "uniform", "fp16", "fp8"};
  return arms;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_same_v<T, std::string>) {
      out += v[i];
    } else {
      out += csv::num(v[i]);
    }
  }
  return out;
}

struct Field {
  std::function<std::string(const ExperimentConfig&)> show;
  // Returns an error message, empty on success.
  std::function<std::string(ExperimentConfig&, const std::string&)> set;
};

inline Field uint_field(std::uint64_t ExperimentConfig::*member, std::uint64_t min,
                        std::uint64_t max = UINT64_MAX) {
  return {[member](const ExperimentConfig& c) { return csv::num(c.*member); },
          [member, min, max](ExperimentConfig& c, const std::string& v) -> std::string {
            std::uint64_t x = 0;
            if (!csv::parse_uint(v, x)) return "expected a non-negative integer";
            if (x < min) return "must be >= " + std::to_string(min);
            if (x > max) return "must be <= " + std::to_string(max);
            c.*member = x;
            return {};
          }};
}

inline Field real_field(double ExperimentConfig::*member, bool positive) {
  return {[member](const ExperimentConfig& c) { return csv::num(c.*member); },
          [member, positive](ExperimentConfig& c, const std::string& v) -> std::string {
            double x = 0;
            if (!csv::parse_double(v, x) || !std::isfinite(x)) return "expected a number";
            if (positive ? !(x > 0.0) : x < 0.0) return positive ? "must be positive" : "must be >= 0";
            c.*member = x;
            return {};
          }};
}

inline Field choice_field(std::string ExperimentConfig::*member, std::vector<std::string> allowed) {
  return {[member](const ExperimentConfig& c) { return c.*member; },
          [member, allowed](ExperimentConfig& c, const std::string& v) -> std::string {
            if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
              return "expected one of " + join(allowed);
            }
            if (v.empty()) return "must not be empty";
            c.*member = v;
            return {};
          }};
}

inline const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["arms"] = {[](const ExperimentConfig& c) { return join(c.arms); },
                 [](ExperimentConfig& c, const std::string& v) -> std::string {
                   auto arms = split_list(v);
                   if (arms.empty()) return "at least one arm required";
                   for (const auto& a : arms) {
                     const auto& known = known_arms();
                     if (std::find(known.begin(), known.end(), a) == known.end()) return "unknown arm " + a;
                   }
                   c.arms = std::move(arms);
                   return {};
                 }};
    t["eta"] = {[](const ExperimentConfig& c) { return join(c.eta); },
                [](ExperimentConfig& c, const std::string& v) -> std::string {
                  std::vector<double> out;
                  for (const auto& item : split_list(v)) {
                    double x = 0;
                    if (!csv::parse_double(item, x) || !(x > 0.0) || !std::isfinite(x)) {
                      return "expected positive numbers";
                    }
                    out.push_back(x);
                  }
                  if (out.empty()) return "expected positive numbers";
                  c.eta = std::move(out);
                  return {};
                }};
    t["widths"] = {[](const ExperimentConfig& c) { return join(c.widths); },
                   [](ExperimentConfig& c, const std::string& v) -> std::string {
                     std::vector<std::uint64_t> out;
                     for (const auto& item : split_list(v)) {
                       std::uint64_t x = 0;
                       if (!csv::parse_uint(item, x) || x == 0) return "expected positive integers";
                       out.push_back(x);
                     }
                     if (out.size() < 2) return "need input and output widths";
                     c.widths = std::move(out);
                     return {};
                   }};
    t["clients"] = uint_field(&ExperimentConfig::clients, 1);
    t["rounds"] = uint_field(&ExperimentConfig::rounds, 1);
    t["batch_size"] = uint_field(&ExperimentConfig::batch_size, 1);
    t["seed"] = uint_field(&ExperimentConfig::seed, 0);
    t["bits"] = uint_field(&ExperimentConfig::bits, 1, 8);
    t["warmup_rounds"] = uint_field(&ExperimentConfig::warmup_rounds, 1);
    t["samples"] = uint_field(&ExperimentConfig::samples, 2);
    t["local_epochs"] = uint_field(&ExperimentConfig::local_epochs, 1);
    t["rate"] = real_field(&ExperimentConfig::rate, true);
    t["M"] = real_field(&ExperimentConfig::M, false);
    t["separation"] = real_field(&ExperimentConfig::separation, false);
    t["init_scale"] = real_field(&ExperimentConfig::init_scale, false);
    t["train_fraction"] = real_field(&ExperimentConfig::train_fraction, true);
    t["mode"] = choice_field(&ExperimentConfig::mode, {"payload_plus_index", "payload_only"});
    t["local_mode"] = choice_field(&ExperimentConfig::local_mode, {"gradient", "delta"});
    t["dataset"] = choice_field(&ExperimentConfig::dataset, {});
    t["out_dir"] = choice_field(&ExperimentConfig::out_dir, {});
    return t;
  }();
  return table;
}

}  // namespace detail

inline ExperimentConfig parse(const std::string& text) {
  ExperimentConfig cfg;
  std::vector<std::string> errors;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const auto& table = detail::fields();
    const auto it = table.find(key);
    if (it == table.end()) {
      errors.push_back(key + ": unknown key");
      continue;
    }
    if (seen[key]++) {
      errors.push_back(key + ": duplicate key");
      continue;
    }
    if (auto msg = it->second.set(cfg, value); !msg.empty()) errors.push_back(key + ": " + msg);
  }
  if (cfg.eta.size() != 1 && cfg.eta.size() < cfg.rounds) {
    errors.push_back("eta: needs one value or one per round");
  }
  if (cfg.train_fraction >= 1.0) errors.push_back("train_fraction: must be below 1");
  if (!errors.empty()) {
    std::string msg = "config errors:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw InvalidArgument(msg);
  }
  return cfg;
}

/// Every key, sorted, one per line.
inline std::string canonical(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [key, field] : detail::fields()) out += key + " = " + field.show(cfg) + "\n";
  return out;
}

inline CompressorKind arm_compressor(const ExperimentConfig& cfg, const std::string& arm) {
  const int bits = static_cast<int>(cfg.bits);
  if (arm == "identity") return CompressorKind::identity();
  if (arm == "mwl2") return CompressorKind::mwl2_adaptive(cfg.M, bits);
  if (arm == "mwl2-fixed") return CompressorKind::mwl2_fixed(cfg.M, bits, {});
  if (arm == "uniform") return CompressorKind::uniform(bits);
  if (arm == "fp16") return CompressorKind::float_trunc(16);
  if (arm == "fp8") return CompressorKind::float_trunc(8);
  throw InvalidArgument("unknown arm " + arm);
}

inline TrainingConfig training_config(const ExperimentConfig& cfg, const std::string& arm) {
  TrainingConfig t;
  t.clients = cfg.clients;
  t.rounds = cfg.rounds;
  t.eta = cfg.eta;
  t.batch_size = cfg.batch_size;
  t.seed = cfg.seed;
  t.compressor = arm_compressor(cfg, arm);
  t.rate = cfg.rate;
  t.mode = parse_accounting_mode(cfg.mode);
  t.adaptive_warmup_rounds = cfg.warmup_rounds;
  t.widths.assign(cfg.widths.begin(), cfg.widths.end());
  t.dataset_path = cfg.dataset == "synthetic" ? std::string{} : cfg.dataset;
  t.synthetic.samples = cfg.samples;
  t.synthetic.separation = cfg.separation;
  t.local_epochs = cfg.local_epochs;
  t.local_mode = cfg.local_mode == "delta" ? LocalMode::kDelta : LocalMode::kGradient;
  t.init_scale = cfg.init_scale;
  t.train_fraction = cfg.train_fraction;
  return t;
}

}  // namespace config
}  // namespace gradq
