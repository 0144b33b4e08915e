// Copyright (c) the maskris-lab authors
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

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>

#include "binio.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr discarded and returns exit code plus stdout.
CliResult cli(const std::string& args) {
  const std::string cmd = std::string(MASKRIS_CLI_PATH) + " " + args + " 2>/dev/null";
  CliResult r;
  FILE* p = popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string scratch(const std::string& name) {
  const fs::path d = fs::path(::testing::TempDir()) / ("maskris_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d.string();
}

bool same_bytes(const std::string& a, const std::string& b) {
  return maskris::binio::read_file(a) == maskris::binio::read_file(b);
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("gen --count 10").code, 2);
  EXPECT_EQ(cli("train --mode sideways --data x --out y").code, 2);
  EXPECT_EQ(cli("--help").code, 0);
}

TEST(Cli, GenIsDeterministicAndReportsSplit) {
  const std::string d = scratch("gen");
  const CliResult a = cli("gen --seed 4 --count 1000 --out " + d + "/a.bin");
  const CliResult b = cli("gen --seed 4 --count 1000 --out " + d + "/b.bin");
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  EXPECT_NE(a.out.find("train=900 val=100"), std::string::npos) << a.out;
  EXPECT_TRUE(same_bytes(d + "/a.bin", d + "/b.bin"));
  EXPECT_TRUE(fs::exists(d + "/a.bin.manifest"));
  EXPECT_EQ(cli("gen --seed 5 --count 1000 --out " + d + "/c.bin").code, 0);
  EXPECT_FALSE(same_bytes(d + "/a.bin", d + "/c.bin"));
}

TEST(Cli, CorruptInputsExitFour) {
  const std::string d = scratch("corrupt");
  ASSERT_EQ(cli("gen --seed 1 --count 50 --out " + d + "/ds.bin").code, 0);
  auto bytes = maskris::binio::read_file(d + "/ds.bin");
  bytes.resize(bytes.size() - 10);
  maskris::binio::write_file_atomic(d + "/bad.bin", bytes);
  EXPECT_EQ(cli("train --data " + d + "/bad.bin --out " + d + "/run --epochs 1").code, 4);
  EXPECT_EQ(cli("train --data " + d + "/missing.bin --out " + d + "/run --epochs 1").code, 1);
}

TEST(Cli, TrainEvalAndReplay) {
  const std::string d = scratch("train");
  ASSERT_EQ(cli("gen --seed 2 --count 120 --out " + d + "/ds.bin").code, 0);
  const CliResult t = cli("train --mode maskris --data " + d + "/ds.bin --out " + d +
                    "/run --epochs 1 --seed 3 --quiet");
  ASSERT_EQ(t.code, 0);
  EXPECT_NE(t.out.find("miou="), std::string::npos);
  EXPECT_NE(t.out.find("oiou="), std::string::npos);
  EXPECT_EQ(std::count(t.out.begin(), t.out.end(), '\n'), 1);
  for (const char* f : {"/run/checkpoint.bin", "/run/stats.csv", "/run/manifest.txt"})
    EXPECT_TRUE(fs::exists(d + f)) << f;

  const CliResult e = cli("eval --ckpt " + d + "/run/checkpoint.bin --data " + d + "/ds.bin --out " +
                    d + "/ev --robustness");
  ASSERT_EQ(e.code, 0);
  EXPECT_TRUE(fs::exists(d + "/ev/robustness.csv"));

  ASSERT_EQ(cli("replay --manifest " + d + "/run/manifest.txt --out " + d + "/run2").code, 0);
  EXPECT_TRUE(same_bytes(d + "/run/checkpoint.bin", d + "/run2/checkpoint.bin"));
  EXPECT_TRUE(same_bytes(d + "/run/stats.csv", d + "/run2/stats.csv"));
  ASSERT_EQ(cli("replay --manifest " + d + "/ev/manifest.txt --out " + d + "/ev2").code, 0);
  EXPECT_TRUE(same_bytes(d + "/ev/eval.csv", d + "/ev2/eval.csv"));
  EXPECT_TRUE(same_bytes(d + "/ev/robustness.csv", d + "/ev2/robustness.csv"));
}

TEST(Cli, MaskPreviewIsDeterministic) {
  const std::string d = scratch("preview");
  ASSERT_EQ(cli("gen --seed 2 --count 20 --out " + d + "/ds.bin").code, 0);
  const std::string base = "mask-preview --data " + d + "/ds.bin --image-from-data 3 --seed 9 ";
  ASSERT_EQ(cli(base + "--out " + d + "/a").code, 0);
  ASSERT_EQ(cli(base + "--out " + d + "/b").code, 0);
  for (const char* f : {"/original.pgm", "/mask.pgm", "/masked.pgm"})
    EXPECT_TRUE(same_bytes(d + "/a" + f, d + "/b" + f)) << f;
  const auto pgm = maskris::binio::read_file(d + "/a/mask.pgm");
  EXPECT_EQ(std::string(pgm.begin(), pgm.begin() + 3), "P5\n");
  EXPECT_EQ(cli("mask-preview --data " + d + "/ds.bin --image-from-data 20 --out " + d + "/c")
                .code,
            2);
}

TEST(Cli, SweepWritesOneRowPerValue) {
  const std::string d = scratch("sweep");
  ASSERT_EQ(cli("gen --seed 2 --count 60 --out " + d + "/ds.bin").code, 0);
  ASSERT_EQ(cli("sweep --param ratio --values 0.75,0.25,0.5 --seeds 1 --epochs 1 --data " + d +
                "/ds.bin --out " + d + "/sw")
                .code,
            0);
  const auto bytes = maskris::binio::read_file(d + "/sw/sweep.csv");
  const std::string csv(bytes.begin(), bytes.end());
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2 + 3);
  EXPECT_LT(csv.find("\nratio,0.25,"), csv.find("\nratio,0.5,"));
  EXPECT_LT(csv.find("\nratio,0.5,"), csv.find("\nratio,0.75,"));
}

TEST(Cli, MaskProbExact) {
  const CliResult r = cli("mask-prob --cells 196 --masked 147 --object-cells 1 --draws 0");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("0.75"), std::string::npos) << r.out;
}

// Same reference run as the trainer floor; training-split mIoU was 0.4428.
TEST(Cli, EvalOnTrainingSplitAboveFloor) {
  const std::string d = scratch("floor");
  ASSERT_EQ(cli("gen --seed 1 --count 1000 --out " + d + "/ds.bin").code, 0);
  ASSERT_EQ(cli("train --mode baseline --seed 1 --epochs 30 --quiet --data " + d +
                "/ds.bin --out " + d + "/run")
                .code,
            0);
  const CliResult e = cli("eval --split train --ckpt " + d + "/run/checkpoint.bin --data " + d +
                          "/ds.bin --out " + d + "/ev");
  ASSERT_EQ(e.code, 0);
  const auto pos = e.out.rfind(" miou=");
  ASSERT_NE(pos, std::string::npos) << e.out;
  EXPECT_GE(std::stod(e.out.substr(pos + 6)), 0.42) << e.out;
}
