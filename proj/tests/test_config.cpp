// Copyright 2026 The stsp Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "stsp/config.hpp"
#include "stsp/error.hpp"
#include "stsp/run_dir.hpp"

using namespace stsp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("stsp_config_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Config, DefaultsAreValid) {
  const TrainConfig c = load_config(std::nullopt);
  EXPECT_EQ(c.n, 10u);
  EXPECT_EQ(c.policy.encoder.d, 64u);
  EXPECT_EQ(c.policy.decoder, DecoderKind::sinkhorn);
}

TEST(Config, MissingFileIsIoError) {
  EXPECT_THROW(load_config(fs::path("/nonexistent/stsp.toml")), IoError);
}

TEST(Config, InvalidLambdaNamesTheField) {
  try {
    load_config(std::nullopt, {{"decoder.lambda", "-1"}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("lambda"), std::string::npos) << e.what();
  }
}

TEST(Config, UnknownKeysAndBadValues) {
  EXPECT_THROW(load_config(std::nullopt, {{"decoder.lamda", "2"}}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {{"train.epochs", "many"}}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {{"train.precision", "f16"}}), ConfigError);
  EXPECT_THROW(parse_config_toml("[train]\nepochs = 'x'\n"), ConfigError);
  EXPECT_THROW(parse_config_toml("[train]\nepoch = 3\n"), ConfigError);
  EXPECT_THROW(parse_config_toml("not toml ["), ConfigError);
  EXPECT_FALSE(is_config_key("bogus"));
  EXPECT_TRUE(is_config_key("decoder.iterations"));
}

TEST(Config, OverridesApplyAfterFile) {
  const fs::path dir = scratch("override");
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "c.toml");
    out << "seed = 3\n[decoder]\nkind = 'softmax'\nlambda = 5.0\n";
  }
  const TrainConfig c = load_config(dir / "c.toml", {{"seed", "9"}, {"decoder.kind", "sinkhorn"}});
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.policy.decoder, DecoderKind::sinkhorn);
  EXPECT_EQ(c.policy.sinkhorn.lambda, 5.0);
  EXPECT_NE(config_to_toml(c).find("seed = 9"), std::string::npos);
  const TrainConfig lr = load_config(dir / "c.toml", {{"train.learning_rate", "0.00025"}});
  EXPECT_EQ(lr.learning_rate, 0.00025);
  EXPECT_NE(config_to_toml(lr).find("learning_rate = 0.00025"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Config, TomlAndJsonRoundTrip) {
  TrainConfig c;
  c.seed = 123456789012345ULL;
  c.learning_rate = 3.0e-5;
  c.policy.sinkhorn.epsilon = 1e-30;
  c.policy.sinkhorn.lambda = 0.1;
  c.policy.encoder.normalization = Normalization::none;
  c.policy.decoder = DecoderKind::softmax;
  c.precision = Precision::f64;
  c.debug_checks = true;
  const std::string toml = config_to_toml(c);
  EXPECT_EQ(config_to_toml(parse_config_toml(toml)), toml);
  EXPECT_EQ(config_to_json(config_from_json(config_to_json(c))), config_to_json(c));
  EXPECT_EQ(parse_config_toml(toml).policy.sinkhorn.lambda, 0.1);
  EXPECT_EQ(config_keys().size(), 23u);
}

TEST(Config, ShippedPresetsLoad) {
  const fs::path root = fs::path(STSP_SOURCE_DIR) / "configs";
  const TrainConfig desk = load_config(root / "desk_tsp10.toml");
  EXPECT_EQ(desk.n, 10u);
  EXPECT_EQ(desk.epochs, 20u);
  EXPECT_EQ(desk.batches_per_epoch, 100u);
  EXPECT_EQ(desk.batch_size, 256u);
  EXPECT_EQ(desk.policy.sinkhorn.iterations, 1u);
  const TrainConfig large = load_config(root / "paper_tsp50.toml");
  EXPECT_EQ(large.n, 50u);
  EXPECT_EQ(large.batch_size, 512u);
}

TEST(RunDirLayout, CreateOpenAndCheckpointNames) {
  const fs::path where = scratch("rundir");
  const RunDir run = RunDir::create(where);
  EXPECT_TRUE(fs::is_directory(run.checkpoint_dir()));
  EXPECT_EQ(run.checkpoint_path(7).filename(), "epoch_0007.stsp");
  EXPECT_THROW(RunDir::open(where), Error);
  write_new_file(run.config_path(), "seed = 1\n");
  EXPECT_THROW(write_new_file(run.config_path(), "seed = 2\n"), IoError);
  EXPECT_EQ(read_file(run.config_path()), "seed = 1\n");
  EXPECT_THROW(RunDir::create(where), Error);
  EXPECT_EQ(RunDir::open(where).path(), run.path());

  write_new_file(run.checkpoint_path(2), "");
  write_new_file(run.checkpoint_path(1), "");
  const auto ckpts = run.checkpoints();
  ASSERT_EQ(ckpts.size(), 2u);
  EXPECT_EQ(ckpts[0].filename(), "epoch_0001.stsp");
  EXPECT_EQ(unused_path(run.config_path()).filename(), "config-1.toml");
  fs::remove_all(where);
}

TEST(RunDirLayout, RootFromEnvironment) {
  const fs::path root = scratch("root");
  ::setenv("STSP_RUN_ROOT", root.c_str(), 1);
  EXPECT_EQ(RunDir::root(), root);
  const RunDir run = RunDir::create("r1");
  EXPECT_EQ(run.path(), root / "r1");
  ::unsetenv("STSP_RUN_ROOT");
  EXPECT_EQ(RunDir::root(), fs::path("runs"));
  fs::remove_all(root);
}
