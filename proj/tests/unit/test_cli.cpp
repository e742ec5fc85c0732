#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include <sys/wait.h>

#include "test_support.hpp"

using dacdet::testsupport::TempDir;

namespace {

// Runs the CLI with `args`, capturing stdout+stderr into `output`; returns the exit code.
int run(const std::string& args, std::string* output = nullptr, const std::filesystem::path& log = {}) {
  const std::filesystem::path capture =
      log.empty() ? std::filesystem::temp_directory_path() / ("dacdet_cli_" + std::to_string(::getpid()) + ".log")
                  : log;
  const std::string cmd = std::string(DACDET_CLI) + " " + args + " > " + capture.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (output) {
    std::ifstream in(capture);
    *output = {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }
  std::filesystem::remove(capture);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  std::string out;
  EXPECT_EQ(run("--help", &out), 0);
  for (const char* sub : {"gen-data", "train", "eval", "ablate", "grad-check"})
    EXPECT_NE(out.find(sub), std::string::npos) << sub;
  EXPECT_EQ(run("", &out), 1);
  EXPECT_EQ(run("frobnicate", &out), 1);
  EXPECT_EQ(run("train --bogus-flag", &out), 1);
}

TEST(Cli, EndToEndAndExitCodes) {
  TempDir d("cli");
  std::ofstream(d / "gen.json") << R"({"n_train": 8, "n_test": 4, "image_size": 32, "radius_min": 3,
                                       "radius_max": 5, "max_shift_px": 0.9})";
  std::ofstream(d / "train.json") << R"({"epochs": 1, "batch_size": 4,
      "model": {"stem_channels": 4, "stage_channels": [4, 8, 8], "stage_blocks": [1, 1, 1],
                "proj_hidden": 12, "proj_dim": 6}})";
  std::string out;
  const std::string data = (d / "data").string();
  ASSERT_EQ(run("gen-data --config " + (d / "gen.json").string() + " --out " + data, &out), 0) << out;
  ASSERT_EQ(run("train --quiet --config " + (d / "train.json").string() + " --data " + data + " --out " +
                    (d / "run").string(),
                &out),
            0)
      << out;
  EXPECT_TRUE(std::filesystem::exists(d / "run/metrics.jsonl"));
  ASSERT_EQ(run("eval --checkpoint " + (d / "run/checkpoint").string() + " --data " + data + " --split test", &out), 0)
      << out;
  EXPECT_NE(out.find("map50"), std::string::npos);
  EXPECT_EQ(run("eval --checkpoint " + (d / "run/checkpoint").string() + " --data " + data + " --split debug --pr-csv " +
                    (d / "pr.csv").string() + " --dets-dir " + (d / "dets").string(),
                &out),
            0)
      << out;
  EXPECT_TRUE(std::filesystem::exists(d / "pr.csv"));
  EXPECT_TRUE(std::filesystem::exists(d / "dets"));

  // Validation failures exit 1.
  std::ofstream(d / "bad.json") << R"({"epochs": 1, "batch_size": 1})";
  EXPECT_EQ(run("train --config " + (d / "bad.json").string() + " --data " + data + " --out " + (d / "x").string(), &out),
            1);
  EXPECT_NE(out.find("batch"), std::string::npos) << out;
  std::ofstream(d / "badgen.json") << R"({"max_shift_px": 10})";
  EXPECT_EQ(run("gen-data --config " + (d / "badgen.json").string() + " --out " + (d / "y").string(), &out), 1);
  EXPECT_EQ(run("eval --checkpoint " + (d / "run/checkpoint").string() + " --data " + data + " --split nope", &out), 1);

  // Runtime failures (missing files, corrupt data) exit 2.
  EXPECT_EQ(run("eval --checkpoint " + (d / "none").string() + " --data " + data, &out), 2);
  EXPECT_EQ(run("train --config " + (d / "train.json").string() + " --data " + (d / "none").string() + " --out " +
                    (d / "z").string(),
                &out),
            2);
}

TEST(Cli, GradCheckReportsComponents) {
  std::string out;
  EXPECT_EQ(run("grad-check --json", &out), 0) << out;
  for (const char* c : {"l_cls", "l_loc", "l_obj", "l_dac", "total"}) EXPECT_NE(out.find(c), std::string::npos) << c;
}
