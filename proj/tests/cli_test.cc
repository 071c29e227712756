// Copyright 2026 The FedHe Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fedhe/cli.h"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fedhe/config.h"
#include "fedhe/error.h"

namespace fedhe {
namespace {

namespace fs = std::filesystem;

// Synthetic data with MNIST-sized inputs so comm costs match the tables.
constexpr const char* kBase = R"(method = fedhe
clients = 2
rounds = 4
eval_every = 2
dataset = synthetic
synthetic.dim = 784
synthetic.per_class = 12
n_public = 10
reported_param_count = 324672

[client 0]
hidden = 8

[client 1]
hidden = 8
)";

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::path(::testing::TempDir()) /
           (std::string("fedhe_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    config_ = dir_ / "base.cfg";
    write(config_, kBase);
  }
  void TearDown() override { fs::remove_all(dir_); }

  static void write(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
  }
  static std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  int run(const std::string& name, std::vector<std::string> overrides = {}) {
    out_.str("");
    err_.str("");
    return cmd_run({config_, std::move(overrides), dir_ / name}, out_, err_);
  }

  int compare(const std::vector<std::string>& names) {
    std::vector<fs::path> paths;
    for (const auto& n : names) paths.push_back(dir_ / n / "manifest.json");
    out_.str("");
    err_.str("");
    return cmd_compare(paths, out_, err_);
  }

  // Value in the reduced_vs_fedavg column for `method`.
  std::string rate_of(const std::string& method) const {
    std::istringstream table(out_.str());
    std::string line;
    while (std::getline(table, line)) {
      std::istringstream cells(line);
      std::string m, acc, floats, rate;
      cells >> m >> acc >> floats >> rate;
      if (m == method) return floats + " " + rate;
    }
    return "<missing>";
  }

  fs::path dir_;
  fs::path config_;
  std::ostringstream out_;
  std::ostringstream err_;
};

TEST_F(CliTest, SyntheticRunWritesAllArtifacts) {
  ASSERT_EQ(run("a"), kExitOk) << err_.str();
  for (const char* f : {"manifest.json", "config.txt", "metrics.csv", "summary.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "a" / f)) << f;
  }
  std::istringstream csv(slurp(dir_ / "a" / "metrics.csv"));
  std::string header, row;
  std::getline(csv, header);
  EXPECT_EQ(header, metrics_header(2));
  ASSERT_TRUE(std::getline(csv, row));
  EXPECT_FALSE(row.empty());
  // The snapshot reproduces the run.
  EXPECT_EQ(parse_config(slurp(dir_ / "a" / "config.txt")),
            parse_config(kBase));
  EXPECT_NE(out_.str().find("comm_per_round=110"), std::string::npos);
}

TEST_F(CliTest, MissingModelSpecIsReported) {
  std::string text = kBase;
  text.replace(text.find("clients = 2"), 11, "clients = 10");
  write(config_, text);
  EXPECT_EQ(run("bad"), kExitConfigError);
  EXPECT_NE(err_.str().find("clients"), std::string::npos) << err_.str();
  EXPECT_NE(err_.str().find("10"), std::string::npos) << err_.str();
  EXPECT_NE(err_.str().find("2 "), std::string::npos) << err_.str();
  EXPECT_FALSE(fs::exists(dir_ / "bad" / "manifest.json"));
}

TEST_F(CliTest, BadOverrideAndMissingFileAreConfigErrors) {
  EXPECT_EQ(run("x", {"rounds=-1"}), kExitConfigError);
  EXPECT_NE(err_.str().find("rounds"), std::string::npos);
  config_ = dir_ / "nope.cfg";
  EXPECT_EQ(run("y"), kExitConfigError);
}

TEST_F(CliTest, MissingDataFileNamesTheField) {
  EXPECT_EQ(run("z", {"dataset=idx", "idx.train_images=missing.gz",
                      "idx.train_labels=missing.gz"}),
            kExitConfigError);
  EXPECT_NE(err_.str().find("idx.train_images"), std::string::npos)
      << err_.str();
}

TEST_F(CliTest, RerunIsByteIdentical) {
  ASSERT_EQ(run("a", {"client.1.speed=3", "client.0.dropout=0.3"}), kExitOk);
  ASSERT_EQ(run("b", {"client.1.speed=3", "client.0.dropout=0.3"}), kExitOk);
  EXPECT_EQ(slurp(dir_ / "a" / "metrics.csv"), slurp(dir_ / "b" / "metrics.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "summary.json"), slurp(dir_ / "b" / "summary.json"));
}

TEST_F(CliTest, CompareReportsReducedRates) {
  ASSERT_EQ(run("fedhe"), kExitOk) << err_.str();
  ASSERT_EQ(run("fedavg", {"method=fedavg"}), kExitOk) << err_.str();
  ASSERT_EQ(run("private", {"method=private"}), kExitOk) << err_.str();
  ASSERT_EQ(run("fedmd", {"method=fedmd"}), kExitOk) << err_.str();
  ASSERT_EQ(compare({"fedhe", "fedavg", "private", "fedmd"}), kExitOk)
      << err_.str();
  EXPECT_EQ(rate_of("fedhe"), "110 >99.9%") << out_.str();
  EXPECT_EQ(rate_of("fedavg"), "324672 0.0%") << out_.str();
  EXPECT_EQ(rate_of("private"), "0 100.0%") << out_.str();
  EXPECT_EQ(rate_of("fedmd"), "7940 97.6%") << out_.str();
}

TEST_F(CliTest, CompareWithoutFedAvgLeavesRateBlank) {
  ASSERT_EQ(run("fedhe"), kExitOk);
  ASSERT_EQ(run("private", {"method=private"}), kExitOk);
  ASSERT_EQ(compare({"fedhe", "private"}), kExitOk);
  EXPECT_EQ(rate_of("fedhe"), "110 n/a");
}

TEST_F(CliTest, CompareRejectsMismatchedDatasets) {
  ASSERT_EQ(run("a"), kExitOk);
  ASSERT_EQ(run("b", {"synthetic.per_class=13"}), kExitOk);
  EXPECT_EQ(compare({"a", "b"}), kExitConfigError);
  EXPECT_NE(err_.str().find("dataset"), std::string::npos);
}

TEST_F(CliTest, CompareRejectsUnknownSchema) {
  ASSERT_EQ(run("a"), kExitOk);
  ASSERT_EQ(run("b", {"seed=2"}), kExitOk);
  std::string m = slurp(dir_ / "b" / "manifest.json");
  const auto at = m.find("\"schema_version\": 1");
  ASSERT_NE(at, std::string::npos) << m;
  m.replace(at, 19, "\"schema_version\": 7");
  write(dir_ / "b" / "manifest.json", m);
  EXPECT_EQ(compare({"a", "b"}), kExitConfigError);
  EXPECT_NE(err_.str().find("schema"), std::string::npos) << err_.str();
  EXPECT_EQ(compare({"a"}), kExitConfigError);
}

TEST_F(CliTest, GeneratedTemplatesRun) {
  std::ostringstream out, err;
  EXPECT_EQ(cmd_gen_config("bogus", {}, out, err), kExitConfigError);
  EXPECT_NE(err.str().find("heterogeneous"), std::string::npos);
  for (const std::string& name : template_names()) {
    const fs::path dest = dir_ / (name + ".cfg");
    ASSERT_EQ(cmd_gen_config(name, dest, out, err), kExitOk);
    ExperimentConfig cfg = load_config_file(dest, {});
    EXPECT_NO_THROW(cfg.validate()) << name;
    EXPECT_EQ(cfg.lr, 0.001);
    EXPECT_EQ(cfg.alpha, 1.0);
    EXPECT_EQ(cfg.inner_epochs, 3u);
    EXPECT_EQ(cfg.batch_size, 32u);
  }
  config_ = dir_ / "synthetic-smoke.cfg";
  EXPECT_EQ(run("smoke", {"rounds=5"}), kExitOk) << err_.str();
}

TEST_F(CliTest, RelativeDataPathsResolveNextToConfig) {
  const fs::path sub = dir_ / "cfgdir";
  fs::create_directories(sub);
  write(sub / "labels.bin", "x");
  EXPECT_EQ(resolve_data_path("f", "labels.bin", sub),
            fs::weakly_canonical(sub / "labels.bin").string());
  EXPECT_THROW(resolve_data_path("f", "absent.bin", sub), ConfigError);
  // Bundled files are found without any path.
  EXPECT_NO_THROW(
      resolve_data_path("f", "mnist10k-labels-idx1-ubyte.gz", sub));
}

}  // namespace
}  // namespace fedhe
