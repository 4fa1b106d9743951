#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ensnet::cli {

enum ExitCode : int {
  kOk = 0,
  kComputeError = 1,
  kConfigError = 2,
  kDataError = 3,
  kCheckpointError = 4,
};

// Runs one command (args exclude the program name), e.g.
//   {"train", "--preset", "tiny-mnist", "--out", "runs/a"}
//   {"eval", "runs/a/checkpoint.ckpt"}
//   {"inspect", "runs/a/checkpoint.ckpt"}
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ensnet::cli
