#pragma once

// Command implementations behind the `hsicwae` executable. Each returns the
// process exit code: 0 success, 1 config/usage, 2 I/O, 3 numeric abort.

#include "hsicwae/checkpoint.hpp"
#include "hsicwae/config.hpp"
#include "hsicwae/eval.hpp"
#include "hsicwae/kernel_stats.hpp"
#include "hsicwae/svg.hpp"
#include "hsicwae/synthdata.hpp"
#include "hsicwae/wae.hpp"

#include "json.hpp"

#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

namespace hsicwae::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kNumeric = 3 };

inline int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kIo: return kIo;
    case ErrorKind::kNumeric: return kNumeric;
    case ErrorKind::kShape:
    case ErrorKind::kConfig:
    case ErrorKind::kPrecondition: return kUsage;
  }
  return kUsage;
}

// Runs `body`, translating library errors into exit codes and messages on err.
inline int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    if (e.step() >= 0) err << "aborted at step " << e.step() << '\n';
    return kNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  }
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'" + (ec ? ": " + ec.message() : ""));
  }
}

// ---- gen-data ---------------------------------------------------------------

inline int cmd_gen_data(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    synth::SyntheticSpec spec = config.data;
    spec.seed = config.seed_or_zero();
    const synth::LabeledDataset ds = synth::generate(spec);
    const auto dir = config.dataset_path();
    ensure_dir(dir);
    synth::export_dataset(ds, dir);
    out << "wrote " << ds.size() << " images to " << dir.string() << " (" << ds.train.size() << " train, "
        << ds.test.size() << " test)\n";
    for (const auto& [level, count] : synth::level_counts(ds)) out << "level " << csv::fmt(level) << ": " << count << '\n';
    return int{kOk};
  });
}

// ---- train ------------------------------------------------------------------

inline const std::vector<std::string>& metrics_header() {
  static const std::vector<std::string> h{"step", "recon", "mmd", "hsic_ind", "hsic_dep", "total"};
  return h;
}

inline int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!config.seed) throw ConfigError("train requires a seed (config \"seed\" or --seed)");
    TrainingConfig tc = config.train;
    tc.seed = *config.seed;
    tc.validate();
    const synth::LabeledDataset ds = synth::import_dataset(config.dataset_path());
    ensure_dir(config.out_dir);

    auto metrics = csv::open_out(config.out_dir / "metrics.csv");
    csv::write_matrix(metrics, metrics_header(), Matrix(0, 6));
    const auto record = [&metrics](long step, const LossBreakdown& lb) {
      metrics << step << ',' << csv::fmt(lb.recon) << ',' << csv::fmt(lb.mmd) << ',' << csv::fmt(lb.hsic_ind) << ','
              << csv::fmt(lb.hsic_dep) << ',' << csv::fmt(lb.total) << '\n';
    };
    TrainResult result;
    try {
      result = train(tc, ds.train_images(), ds.train_levels(), record);
    } catch (const NumericError&) {
      metrics.flush();
      throw;
    }
    metrics.flush();
    if (!metrics) throw IoError("failed writing metrics.csv");

    Checkpoint ckpt;
    ckpt.header = config_echo(tc, ds.images.cols());
    ckpt.model = result.model;
    save_checkpoint(config.checkpoint_path(), ckpt);
    out << "trained " << tc.steps << " steps on " << ds.train.size() << " images; checkpoint "
        << config.checkpoint_path().string() << '\n';
    if (!result.trace.empty()) {
      const LossBreakdown& last = result.trace.back();
      out << "final recon=" << last.recon << " mmd=" << last.mmd << " hsic_ind=" << last.hsic_ind
          << " hsic_dep=" << last.hsic_dep << " total=" << last.total << '\n';
    }
    return int{kOk};
  });
}

// ---- eval -------------------------------------------------------------------

struct EvalReport {
  nlohmann::json summary;
  Matrix scatter;  // z_dep, pc1, level
  eval::KdeResult kde_dep;
  eval::KdeResult kde_pc1;
  eval::NnRegressionReport regression;
};

inline nlohmann::json kernel_test_json(const PermutationNull& null, int permutations) {
  return {{"value", null.observed},
          {"p_value", null.p_value},
          {"null_q95", null.quantile(0.95)},
          {"permutations", permutations}};
}

// Analyses a trained model on the held-out split. Deterministic in `seed`.
inline EvalReport evaluate_model(const WaeModel& model, const synth::LabeledDataset& ds, const EvalOptions& opts,
                                 std::uint64_t seed) {
  const Matrix x = ds.test_images();
  const Matrix s = ds.test_levels();
  if (x.rows() < 3) throw PreconditionError("eval needs at least 3 test images");
  if (x.cols() != model.encoder.in_dim()) {
    throw ConfigError("checkpoint expects " + std::to_string(model.encoder.in_dim()) + " pixels, dataset has " +
                      std::to_string(x.cols()));
  }
  const LatentPartition z = encode(model.encoder, x);
  const Eigen::Index d_z = z.z.cols();
  Rng rng(splitmix64(seed ^ 0xe7a1ULL));

  EvalReport rep;
  const auto cors = eval::correlations(z.z, s.col(0));
  eval::PrincipalComponent pc;
  if (d_z >= 2) {
    pc = eval::first_pc(z.ind());
  } else {
    pc.projections = Vector::Zero(x.rows());
    pc.degenerate = true;
  }
  rep.scatter.resize(x.rows(), 3);
  rep.scatter.col(0) = z.z.col(0);
  rep.scatter.col(1) = pc.projections;
  rep.scatter.col(2) = s.col(0);

  const auto kde_for = [&](const Vector& v) {
    // Pad by five pooled Silverman-style widths; every per-level bandwidth is smaller.
    const double sd = std::sqrt((v.array() - v.mean()).square().mean());
    return eval::kde_1d(v, s.col(0), eval::padded_grid(v, 5.0 * 1.06 * sd + 1e-12, opts.kde_points));
  };
  rep.kde_dep = kde_for(rep.scatter.col(0));
  rep.kde_pc1 = kde_for(rep.scatter.col(1));

  rep.regression = eval::nn_regress([&model](const Matrix& zz) { return decode(model.decoder, zz); }, d_z, x, s,
                                    opts.k, opts.n_gen, rng, opts.regression_mode);

  nlohmann::json j;
  j["n_test"] = x.rows();
  j["d_z"] = d_z;
  j["seed"] = seed;
  nlohmann::json axes = nlohmann::json::array();
  double max_ind = 0.0;
  for (const auto& c : cors) {
    axes.push_back({{"axis", c.axis}, {"pearson", c.pearson}, {"spearman", c.spearman}, {"zero_variance", c.zero_variance}});
    if (c.axis > 0) max_ind = std::max(max_ind, std::abs(c.spearman));
  }
  j["correlations"] = axes;
  j["dep_spearman"] = cors.front().spearman;
  j["max_abs_spearman_ind"] = max_ind;
  j["regression"] = {{"k", opts.k},
                     {"n_gen", opts.n_gen},
                     {"mode", eval::mode_name(opts.regression_mode)},
                     {"slope", rep.regression.fit.slope},
                     {"intercept", rep.regression.fit.intercept},
                     {"pearson_r", rep.regression.fit.pearson_r}};

  const KernelSpec side_kernel = rbf_median(s);
  const Matrix dep = z.dep();
  if (opts.permutations > 0) {
    j["hsic_dep"] = kernel_test_json(permutation_null(rbf_median(dep), side_kernel, dep, s, opts.permutations, rng),
                                     opts.permutations);
  } else {
    j["hsic_dep"] = {{"value", hsic_b(rbf_median(dep), side_kernel, dep, s).value}};
  }
  if (d_z >= 2) {
    const Matrix ind = z.ind();
    if (opts.permutations > 0) {
      j["hsic_ind"] = kernel_test_json(permutation_null(rbf_median(ind), side_kernel, ind, s, opts.permutations, rng),
                                       opts.permutations);
    } else {
      j["hsic_ind"] = {{"value", hsic_b(rbf_median(ind), side_kernel, ind, s).value}};
    }
  } else {
    j["hsic_ind"] = nullptr;
  }
  j["pc1_direction"] = std::vector<double>(pc.direction.data(), pc.direction.data() + pc.direction.size());
  nlohmann::json warnings = nlohmann::json::array();
  for (const auto& w : rep.kde_dep.warnings) warnings.push_back("z_dep: " + w);
  for (const auto& w : rep.kde_pc1.warnings) warnings.push_back("pc1: " + w);
  j["kde_warnings"] = warnings;
  rep.summary = std::move(j);
  return rep;
}

inline void write_kde(const std::filesystem::path& path, const eval::KdeResult& kde) {
  auto out = csv::open_out(path);
  out << "grid,level,density\n";
  for (const auto& c : kde.curves) {
    for (Eigen::Index g = 0; g < c.grid.size(); ++g) {
      out << csv::fmt(c.grid(g)) << ',' << csv::fmt(c.level) << ',' << csv::fmt(c.density(g)) << '\n';
    }
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline Eigen::Index header_int(const Checkpoint& ckpt, const std::string& key) {
  const auto it = ckpt.header.find(key);
  if (it == ckpt.header.end()) throw IoError("checkpoint header lacks '" + key + "'");
  try {
    return std::stol(it->second);
  } catch (const std::logic_error&) {
    throw IoError("checkpoint header '" + key + "' is not an integer");
  }
}

inline int cmd_eval(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Checkpoint ckpt = load_checkpoint(config.checkpoint_path());
    const Eigen::Index d_z = header_int(ckpt, "d_z");
    if (d_z != config.train.d_z || ckpt.model.encoder.out_dim() != config.train.d_z) {
      throw ConfigError("checkpoint d_z=" + std::to_string(d_z) + " does not match config d_z=" +
                        std::to_string(config.train.d_z));
    }
    const synth::LabeledDataset ds = synth::import_dataset(config.dataset_path());
    const EvalReport rep = evaluate_model(ckpt.model, ds, config.eval, config.seed_or_zero());

    ensure_dir(config.out_dir);
    csv::write_matrix(config.out_dir / "scatter.csv", {"z_dep", "pc1", "level"}, rep.scatter);
    write_kde(config.out_dir / "kde.csv", rep.kde_dep);
    write_kde(config.out_dir / "kde_pc1.csv", rep.kde_pc1);
    csv::write_matrix(config.out_dir / "regression.csv", {"z_dep", "neighbor_s"}, rep.regression.pairs());
    {
      auto js = csv::open_out(config.out_dir / "summary.json");
      js << rep.summary.dump(2) << '\n';
      if (!js) throw IoError("failed writing summary.json");
    }
    if (config.eval.svg) {
      auto sv = csv::open_out(config.out_dir / "scatter.svg");
      sv << svg::scatter(rep.scatter.col(0), rep.scatter.col(1), rep.scatter.col(2), "Z_dep", "PC1 of Z_ind");
      if (!sv) throw IoError("failed writing scatter.svg");
    }
    out << "evaluated " << rep.summary["n_test"] << " test images; regression slope "
        << rep.summary["regression"]["slope"] << ", r " << rep.summary["regression"]["pearson_r"] << '\n';
    return int{kOk};
  });
}

// ---- hsic -------------------------------------------------------------------

struct HsicOptions {
  std::filesystem::path x_path;
  std::filesystem::path y_path;
  std::string kernel = "rbf";  // rbf (median trick) or imq
  int permutations = 0;
  std::uint64_t seed = 0;
  bool mmd = false;
};

inline int cmd_hsic(const HsicOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (opts.kernel != "rbf" && opts.kernel != "imq") throw ConfigError("--kernel must be 'rbf' or 'imq'");
    if (opts.permutations < 0) throw ConfigError("permutation count must be >= 0");
    const Matrix x = csv::read_matrix(opts.x_path).values;
    const Matrix y = csv::read_matrix(opts.y_path).values;
    Rng rng(opts.seed);
    nlohmann::json j;
    j["kernel"] = opts.kernel;
    j["permutations"] = opts.permutations;
    if (opts.mmd) {
      if (x.cols() != y.cols()) throw ShapeError("x and y must have the same number of columns for MMD");
      if (x.rows() < 2 || y.rows() < 2) throw PreconditionError("MMD needs at least 2 rows in each file");
      KernelSpec spec = KernelSpec::imq();
      if (opts.kernel == "rbf") {
        Matrix pooled(x.rows() + y.rows(), x.cols());
        pooled << x, y;
        spec = rbf_median(pooled);
        j["sigma2"] = spec.sigma2;
      }
      const MmdEstimate est = mmd_u_sq(spec, x, y);
      j["statistic"] = "mmd_u_sq";
      j["value"] = est.value;
      j["m"] = est.m;
      j["n"] = est.n;
      j["p_value"] = opts.permutations > 0
                         ? nlohmann::json(mmd_permutation_null(spec, x, y, opts.permutations, rng).p_value)
                         : nlohmann::json(nullptr);
    } else {
      if (x.rows() != y.rows()) {
        throw ShapeError("x has " + std::to_string(x.rows()) + " rows, y has " + std::to_string(y.rows()) +
                         "; HSIC needs paired rows");
      }
      if (x.rows() < 2) throw PreconditionError("HSIC needs at least 2 rows");
      KernelSpec k = KernelSpec::imq();
      KernelSpec l = KernelSpec::imq();
      if (opts.kernel == "rbf") {
        k = rbf_median(x);
        l = rbf_median(y);
        j["sigma2_x"] = k.sigma2;
        j["sigma2_y"] = l.sigma2;
      }
      j["statistic"] = "hsic_b";
      j["value"] = hsic_b(k, l, x, y).value;
      j["n"] = x.rows();
      j["p_value"] = opts.permutations > 0
                         ? nlohmann::json(permutation_null(k, l, x, y, opts.permutations, rng).p_value)
                         : nlohmann::json(nullptr);
    }
    out << j.dump() << '\n';
    return int{kOk};
  });
}

}  // namespace hsicwae::cli
