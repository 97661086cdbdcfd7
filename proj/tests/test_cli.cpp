#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "nsn/checkpoint.hpp"
#include "nsn/train.hpp"
#include "nsn/verify.hpp"

namespace nsn {
namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(NSN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, VerifyPasses) { EXPECT_EQ(run("verify"), 0); }

TEST(Cli, HelpExitsZero) { EXPECT_EQ(run("--help"), 0); }

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("train --epochs 0"), 2);
  EXPECT_EQ(run("train --no-such-flag"), 2);
  EXPECT_EQ(run("train-ref --n-hidden 3"), 2);
  EXPECT_EQ(run("train --epochs 1 --data-dir /nonexistent/mnist"), 2);
  EXPECT_EQ(run("eval --checkpoint /nonexistent.ckpt"), 2);
}

TEST(Cli, DetachBeyondDepthIsUsageError) {
  const auto dir = std::filesystem::temp_directory_path() / "nsn_cli_test";
  std::filesystem::create_directories(dir);
  const TrainConfig config = small_config(2, 6);
  const TrainState s = initial_state(config);
  save_checkpoint(dir / "f.ckpt", make_checkpoint(config, s.groups, s.momentum, 0));
  EXPECT_EQ(run("detach-eval --checkpoint " + (dir / "f.ckpt").string() + " --drop-layers 3"), 2);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace nsn
