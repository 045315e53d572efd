#pragma once

// JSON run configuration. Every key is optional and defaulted; unknown keys
// are rejected. Layout:
//
// {
//   "seed": 1,
//   "out_dir": "run",
//   "dataset_dir": "run/data",          // default: <out_dir>/data
//   "checkpoint": "run/checkpoint.txt", // default: <out_dir>/checkpoint.txt
//   "data":  { "side", "levels", "samples_per_level", "r0", "radius_slope",
//              "rotation_min", "rotation_max", "ecc_min", "ecc_max",
//              "jitter", "noise_sigma", "test_fraction" },
//   "train": { "preset", "d_z", "encoder_hidden", "decoder_hidden",
//              "batch_size", "steps", "lambda1", "lambda2", "lambda3",
//              "learning_rate", "regularizer": "disentangle" | "all_axes",
//              "bandwidth": { "policy": "median" | "frozen",
//                             "latent_sigma2", "side_sigma2" } },
//   "eval":  { "k", "n_gen", "permutations",
//              "regression_mode": "pooled" | "averaged",
//              "svg", "kde_points" }
// }
//
// A preset fills lambda1..3; explicit lambda keys override it.

#include "hsicwae/eval.hpp"
#include "hsicwae/synthdata.hpp"
#include "hsicwae/wae.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace hsicwae {

struct EvalOptions {
  int k = 3;
  int n_gen = 200;
  int permutations = 200;
  eval::RegressionMode regression_mode = eval::RegressionMode::kPooled;
  bool svg = true;
  int kde_points = 256;
};

struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir = "run";
  std::optional<std::filesystem::path> dataset_dir;
  std::optional<std::filesystem::path> checkpoint;
  synth::SyntheticSpec data;
  TrainingConfig train = preset_config("synthetic");
  EvalOptions eval;

  std::filesystem::path dataset_path() const { return dataset_dir.value_or(out_dir / "data"); }
  std::filesystem::path checkpoint_path() const { return checkpoint.value_or(out_dir / "checkpoint.txt"); }
  std::uint64_t seed_or_zero() const { return seed.value_or(0); }

  // Pushes the run seed into the data and training sections.
  void apply_seed(std::uint64_t s) {
    seed = s;
    data.seed = s;
    train.seed = s;
  }
};

namespace detail {

using nlohmann::json;

class ConfigReader {
 public:
  void expect_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where.empty() ? "config must be a JSON object" : where + " must be an object");
  }

  void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
    for (const auto& [key, value] : j.items()) {
      if (!allowed.count(key)) unknown_.push_back(where.empty() ? key : where + "." + key);
    }
  }

  template <typename T>
  void read(const json& j, const std::string& where, const char* key, T& out) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    const std::string name = where.empty() ? key : where + "." + key;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(name);
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(name);
        if (std::is_unsigned_v<T> && v.get<long long>() < 0) throw ConfigError(name);
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(name);
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(name);
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      bad_types_.push_back(name);
    }
  }

  void fail_if_needed() const {
    if (unknown_.empty() && bad_types_.empty()) return;
    std::string msg = "invalid config:";
    if (!unknown_.empty()) {
      msg += " unknown keys [";
      for (std::size_t i = 0; i < unknown_.size(); ++i) msg += (i ? ", " : "") + unknown_[i];
      msg += "]";
    }
    if (!bad_types_.empty()) {
      msg += " wrong types for [";
      for (std::size_t i = 0; i < bad_types_.size(); ++i) msg += (i ? ", " : "") + bad_types_[i];
      msg += "]";
    }
    throw ConfigError(msg);
  }

 private:
  std::vector<std::string> unknown_;
  std::vector<std::string> bad_types_;
};

inline std::vector<Eigen::Index> to_dims(const std::vector<long>& v) { return {v.begin(), v.end()}; }

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  detail::ConfigReader r;
  r.expect_object(j, "");
  r.check_keys(j, "", {"seed", "out_dir", "dataset_dir", "checkpoint", "data", "train", "eval"});
  RunConfig c;

  if (j.contains("seed")) {
    std::uint64_t seed = 0;
    r.read(j, "", "seed", seed);
    c.apply_seed(seed);
  }
  std::string path;
  if (j.contains("out_dir")) {
    r.read(j, "", "out_dir", path);
    c.out_dir = path;
  }
  if (j.contains("dataset_dir")) {
    r.read(j, "", "dataset_dir", path);
    c.dataset_dir = path;
  }
  if (j.contains("checkpoint")) {
    r.read(j, "", "checkpoint", path);
    c.checkpoint = path;
  }

  if (j.contains("data")) {
    const auto& d = j.at("data");
    r.expect_object(d, "data");
    r.check_keys(d, "data",
                 {"side", "levels", "samples_per_level", "r0", "radius_slope", "rotation_min", "rotation_max", "ecc_min",
                  "ecc_max", "jitter", "noise_sigma", "test_fraction"});
    auto& s = c.data;
    r.read(d, "data", "side", s.side);
    r.read(d, "data", "levels", s.levels);
    r.read(d, "data", "samples_per_level", s.samples_per_level);
    r.read(d, "data", "r0", s.r0);
    r.read(d, "data", "radius_slope", s.radius_slope);
    r.read(d, "data", "rotation_min", s.rotation_min);
    r.read(d, "data", "rotation_max", s.rotation_max);
    r.read(d, "data", "ecc_min", s.ecc_min);
    r.read(d, "data", "ecc_max", s.ecc_max);
    r.read(d, "data", "jitter", s.jitter);
    r.read(d, "data", "noise_sigma", s.noise_sigma);
    r.read(d, "data", "test_fraction", s.test_fraction);
  }

  if (j.contains("train")) {
    const auto& t = j.at("train");
    r.expect_object(t, "train");
    r.check_keys(t, "train",
                 {"preset", "d_z", "encoder_hidden", "decoder_hidden", "batch_size", "steps", "lambda1", "lambda2",
                  "lambda3", "learning_rate", "bandwidth", "regularizer"});
    std::string preset = c.train.preset;
    r.read(t, "train", "preset", preset);
    TrainingConfig& tc = c.train;
    if (preset != tc.preset) {
      const auto p = find_preset(preset);
      if (!p) throw ConfigError("invalid config: unknown preset '" + preset + "' (train.preset)");
      tc.preset = preset;
      tc.lambda1 = p->lambda1;
      tc.lambda2 = p->lambda2;
      tc.lambda3 = p->lambda3;
    }
    long d_z = tc.d_z;
    long batch = tc.batch_size;
    r.read(t, "train", "d_z", d_z);
    r.read(t, "train", "batch_size", batch);
    tc.d_z = d_z;
    tc.batch_size = batch;
    std::vector<long> enc(tc.encoder_hidden.begin(), tc.encoder_hidden.end());
    std::vector<long> dec(tc.decoder_hidden.begin(), tc.decoder_hidden.end());
    r.read(t, "train", "encoder_hidden", enc);
    r.read(t, "train", "decoder_hidden", dec);
    tc.encoder_hidden = detail::to_dims(enc);
    tc.decoder_hidden = detail::to_dims(dec);
    r.read(t, "train", "steps", tc.steps);
    r.read(t, "train", "lambda1", tc.lambda1);
    r.read(t, "train", "lambda2", tc.lambda2);
    r.read(t, "train", "lambda3", tc.lambda3);
    r.read(t, "train", "learning_rate", tc.learning_rate);
    std::string reg = tc.regularizer == Regularizer::kAllAxes ? "all_axes" : "disentangle";
    r.read(t, "train", "regularizer", reg);
    if (reg == "disentangle") {
      tc.regularizer = Regularizer::kDisentangle;
    } else if (reg == "all_axes") {
      tc.regularizer = Regularizer::kAllAxes;
    } else {
      throw ConfigError("invalid config: train.regularizer must be 'disentangle' or 'all_axes'");
    }
    if (t.contains("bandwidth")) {
      const auto& b = t.at("bandwidth");
      r.expect_object(b, "train.bandwidth");
      r.check_keys(b, "train.bandwidth", {"policy", "latent_sigma2", "side_sigma2"});
      std::string policy = "median";
      r.read(b, "train.bandwidth", "policy", policy);
      if (policy == "median") {
        tc.bandwidth.kind = BandwidthPolicy::Kind::kPerBatchMedian;
      } else if (policy == "frozen") {
        tc.bandwidth.kind = BandwidthPolicy::Kind::kFrozen;
      } else {
        throw ConfigError("invalid config: train.bandwidth.policy must be 'median' or 'frozen'");
      }
      r.read(b, "train.bandwidth", "latent_sigma2", tc.bandwidth.latent_sigma2);
      r.read(b, "train.bandwidth", "side_sigma2", tc.bandwidth.side_sigma2);
    }
  }

  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    r.expect_object(e, "eval");
    r.check_keys(e, "eval", {"k", "n_gen", "permutations", "regression_mode", "svg", "kde_points"});
    r.read(e, "eval", "k", c.eval.k);
    r.read(e, "eval", "n_gen", c.eval.n_gen);
    r.read(e, "eval", "permutations", c.eval.permutations);
    r.read(e, "eval", "svg", c.eval.svg);
    r.read(e, "eval", "kde_points", c.eval.kde_points);
    std::string mode = eval::mode_name(c.eval.regression_mode);
    r.read(e, "eval", "regression_mode", mode);
    if (mode == "pooled") {
      c.eval.regression_mode = eval::RegressionMode::kPooled;
    } else if (mode == "averaged") {
      c.eval.regression_mode = eval::RegressionMode::kAveraged;
    } else {
      throw ConfigError("invalid config: eval.regression_mode must be 'pooled' or 'averaged'");
    }
  }
  r.fail_if_needed();
  if (c.eval.k < 1) throw ConfigError("invalid config: eval.k must be >= 1");
  if (c.eval.n_gen < 10) throw ConfigError("invalid config: eval.n_gen must be >= 10");
  if (c.eval.permutations != 0 && c.eval.permutations < 50) {
    throw ConfigError("invalid config: eval.permutations must be 0 or >= 50");
  }
  if (c.eval.kde_points < 2) throw ConfigError("invalid config: eval.kde_points must be >= 2");
  return c;
}

inline RunConfig parse_run_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_run_config(j);
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  auto in = csv::open_in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_run_config(text);
}

// key=value echo of the training setup, stored in checkpoints.
inline std::map<std::string, std::string> config_echo(const TrainingConfig& t, Eigen::Index d_x) {
  const auto dims = [](const std::vector<Eigen::Index>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + std::to_string(v[i]);
    return s;
  };
  return {
      {"preset", t.preset},
      {"d_x", std::to_string(d_x)},
      {"d_z", std::to_string(t.d_z)},
      {"encoder_hidden", dims(t.encoder_hidden)},
      {"decoder_hidden", dims(t.decoder_hidden)},
      {"batch_size", std::to_string(t.batch_size)},
      {"steps", std::to_string(t.steps)},
      {"lambda1", csv::fmt(t.lambda1)},
      {"lambda2", csv::fmt(t.lambda2)},
      {"lambda3", csv::fmt(t.lambda3)},
      {"learning_rate", csv::fmt(t.learning_rate)},
      {"seed", std::to_string(t.seed)},
      {"regularizer", t.regularizer == Regularizer::kAllAxes ? "all_axes" : "disentangle"},
      {"bandwidth", t.bandwidth.kind == BandwidthPolicy::Kind::kFrozen
                        ? "frozen:" + csv::fmt(t.bandwidth.latent_sigma2) + ":" + csv::fmt(t.bandwidth.side_sigma2)
                        : "median"},
  };
}

}  // namespace hsicwae
