#include "hsicwae/checkpoint.hpp"
#include "hsicwae/config.hpp"
#include "hsicwae/csv.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

using hsicwae::Matrix;
using hsicwae::Rng;
namespace csv = hsicwae::csv;

TEST(Csv, SeventeenDigitRoundTrip) {
  Rng rng(1);
  Matrix m = oracle::random_matrix(20, 4, rng, 1e3);
  m(0, 0) = 0.1;
  m(0, 1) = -std::numeric_limits<double>::denorm_min();
  m(0, 2) = std::numeric_limits<double>::max();
  m(0, 3) = 1.0 / 3.0;
  std::stringstream ss;
  csv::write_matrix(ss, {"a", "b", "c", "d"}, m);
  const auto t = csv::read_matrix(ss);
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b", "c", "d"}));
  EXPECT_EQ(t.values, m);
}

TEST(Csv, HeaderlessAndQuotedFields) {
  std::stringstream ss("1,2\n3,4\n");
  const auto t = csv::read_matrix(ss);
  EXPECT_TRUE(t.header.empty());
  EXPECT_EQ(t.values.rows(), 2);
  EXPECT_EQ(t.values(1, 0), 3.0);
  EXPECT_EQ(csv::split_line("\"a,b\",c"), (std::vector<std::string>{"a,b", "c"}));
}

TEST(Csv, RaggedAndNonNumericRowsNameTheLine) {
  std::stringstream ragged("x,y\n1,2\n3\n");
  try {
    csv::read_matrix(ragged, "r.csv");
    FAIL() << "expected ConfigError";
  } catch (const hsicwae::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("r.csv:3"), std::string::npos) << e.what();
  }
  std::stringstream text("1,2\n3,abc\n");
  EXPECT_THROW(csv::read_matrix(text), hsicwae::ConfigError);
  EXPECT_THROW(csv::read_matrix(std::filesystem::path("/nonexistent/file.csv")), hsicwae::IoError);
}

TEST(Checkpoint, ExactRoundTrip) {
  Rng rng(3);
  hsicwae::TrainingConfig tc = hsicwae::preset_config("synthetic");
  tc.d_z = 3;
  tc.encoder_hidden = {5};
  tc.decoder_hidden = {4, 6};
  hsicwae::Checkpoint ck;
  ck.model = hsicwae::init_model(tc, 9, rng);
  for (auto* net : {&ck.model.encoder, &ck.model.decoder})
    for (auto& l : net->layers) l.bias = oracle::random_matrix(l.bias.size(), 1, rng);
  ck.header = hsicwae::config_echo(tc, 9);
  std::stringstream ss;
  hsicwae::save_checkpoint(ss, ck);
  const auto back = hsicwae::load_checkpoint(ss);
  EXPECT_TRUE(back.model.encoder == ck.model.encoder);
  EXPECT_TRUE(back.model.decoder == ck.model.decoder);
  EXPECT_EQ(back.header, ck.header);
  EXPECT_EQ(back.header.at("lambda2"), "1000");
}

TEST(Checkpoint, MalformedInputsReportIoError) {
  std::stringstream bad_magic("not-a-checkpoint\n");
  EXPECT_THROW(hsicwae::load_checkpoint(bad_magic), hsicwae::IoError);
  std::stringstream truncated(std::string(hsicwae::kCheckpointMagic) + "\nd_z=2\nend-header\nmatrix,encoder,0,weight,2,2,identity\n1,2\n");
  EXPECT_THROW(hsicwae::load_checkpoint(truncated), hsicwae::IoError);
  std::stringstream empty(std::string(hsicwae::kCheckpointMagic) + "\nend-header\n");
  EXPECT_THROW(hsicwae::load_checkpoint(empty), hsicwae::IoError);
  EXPECT_THROW(hsicwae::load_checkpoint(std::filesystem::path("/nonexistent/ck.txt")), hsicwae::IoError);
}

TEST(Config, DefaultsAndPresetOverride) {
  const auto c = hsicwae::parse_run_config(std::string("{}"));
  EXPECT_FALSE(c.seed);
  EXPECT_EQ(c.train.preset, "synthetic");
  EXPECT_EQ(c.train.d_z, 8);
  EXPECT_EQ(c.train.steps, 3000);
  EXPECT_EQ(c.train.batch_size, 128);
  EXPECT_EQ(c.data.levels, 5);
  EXPECT_EQ(c.data.samples_per_level, 1000);
  EXPECT_EQ(c.dataset_path(), std::filesystem::path("run") / "data");

  const auto k = hsicwae::parse_run_config(std::string(R"({"seed": 5, "train": {"preset": "k562", "lambda3": 0.5}})"));
  EXPECT_EQ(*k.seed, 5u);
  EXPECT_EQ(k.train.seed, 5u);
  EXPECT_EQ(k.data.seed, 5u);
  EXPECT_EQ(k.train.lambda1, 10.0);
  EXPECT_EQ(k.train.lambda2, 0.2);
  EXPECT_EQ(k.train.lambda3, 0.5);
}

TEST(Config, StrictSchemaCollectsProblems) {
  try {
    hsicwae::parse_run_config(std::string(R"({"trian": {}, "train": {"lambda_2": 1, "steps": "many"}})"));
    FAIL() << "expected ConfigError";
  } catch (const hsicwae::ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("trian"), std::string::npos) << what;
    EXPECT_NE(what.find("train.lambda_2"), std::string::npos) << what;
    EXPECT_NE(what.find("train.steps"), std::string::npos) << what;
  }
  EXPECT_THROW(hsicwae::parse_run_config(std::string("{not json")), hsicwae::ConfigError);
  EXPECT_THROW(hsicwae::parse_run_config(std::string(R"({"train": {"preset": "mnist"}})")), hsicwae::ConfigError);
  EXPECT_THROW(hsicwae::parse_run_config(std::string(R"({"eval": {"permutations": 10}})")), hsicwae::ConfigError);
  EXPECT_THROW(hsicwae::parse_run_config(std::string(R"({"train": {"regularizer": "both"}})")), hsicwae::ConfigError);
  EXPECT_THROW(hsicwae::load_run_config("/nonexistent/config.json"), hsicwae::IoError);
}

TEST(Config, NestedSections) {
  const auto c = hsicwae::parse_run_config(std::string(R"({
    "out_dir": "o", "dataset_dir": "d", "checkpoint": "c.txt",
    "data": {"levels": 3, "samples_per_level": 7, "noise_sigma": 0.0},
    "train": {"d_z": 4, "encoder_hidden": [8], "bandwidth": {"policy": "frozen", "latent_sigma2": 2.0}},
    "eval": {"regression_mode": "averaged", "svg": false, "permutations": 0}})"));
  EXPECT_EQ(c.dataset_path(), std::filesystem::path("d"));
  EXPECT_EQ(c.checkpoint_path(), std::filesystem::path("c.txt"));
  EXPECT_EQ(c.data.levels, 3);
  EXPECT_EQ(c.data.noise_sigma, 0.0);
  EXPECT_EQ(c.train.encoder_hidden, (std::vector<Eigen::Index>{8}));
  EXPECT_EQ(c.train.bandwidth.kind, hsicwae::BandwidthPolicy::Kind::kFrozen);
  EXPECT_EQ(c.train.bandwidth.latent_sigma2, 2.0);
  EXPECT_EQ(c.eval.regression_mode, hsicwae::eval::RegressionMode::kAveraged);
  EXPECT_FALSE(c.eval.svg);
}
