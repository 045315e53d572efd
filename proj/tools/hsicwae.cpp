#include "hsicwae/cli.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>

int main(int argc, char** argv) {
  using namespace hsicwae;

  CLI::App app{"HSIC-regularized Wasserstein auto-encoder: data generation, training, evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Seed for all random streams");
  app.add_option("--out-dir", out_dir, "Output directory");

  auto* gen = app.add_subcommand("gen-data", "Render the synthetic blob dataset (PGM images + manifest.csv)");
  auto* train = app.add_subcommand("train", "Train a model; writes metrics.csv and a checkpoint");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate (default <out-dir>/checkpoint.txt)");

  auto* hsic = app.add_subcommand("hsic", "Estimate HSIC_b (or MMD^2 with --mmd) between two CSV matrices");
  cli::HsicOptions hopts;
  hsic->add_option("x", hopts.x_path, "CSV for X")->required();
  hsic->add_option("y", hopts.y_path, "CSV for Y")->required();
  hsic->add_option("--kernel", hopts.kernel, "rbf (median trick) or imq")->check(CLI::IsMember({"rbf", "imq"}));
  hsic->add_option("-B,--permutations", hopts.permutations, "Permutation count for the p-value (0 = none)");
  hsic->add_flag("--mmd", hopts.mmd, "Unbiased MMD^2 between unpaired sets instead of HSIC");

  for (auto* sub : {gen, train, eval, hsic}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kUsage;
  }

  if (*hsic) {
    hopts.seed = seed.value_or(0);
    return cli::cmd_hsic(hopts, std::cout, std::cerr);
  }

  RunConfig config;
  const int loaded = cli::guarded(std::cerr, [&] {
    if (!config_path.empty()) config = load_run_config(config_path);
    return int{cli::kOk};
  });
  if (loaded != cli::kOk) return loaded == cli::kIo ? cli::kIo : cli::kUsage;
  if (seed) config.apply_seed(*seed);
  if (!out_dir.empty()) config.out_dir = out_dir;
  if (!checkpoint.empty()) config.checkpoint = checkpoint;

  if (*gen) return cli::cmd_gen_data(config, std::cout, std::cerr);
  if (*train) return cli::cmd_train(config, std::cout, std::cerr);
  return cli::cmd_eval(config, std::cout, std::cerr);
}
