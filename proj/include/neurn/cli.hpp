#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace neurn::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kData = 2,
  kNumeric = 3,
};

/// Parses argv (argv[0] is the program name) and runs one subcommand:
///
///   neurn apply | reps neural | reps features | select sample |
///   rsa compare | rsa scatter | kde iou | bench domain | synth gen
///
/// Global flags: --seed, --config, --out, --threads (NEURN_THREADS is the
/// fallback). Every run writes a manifest echoing the effective config.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Convenience overload; args excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace neurn::cli
