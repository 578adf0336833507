#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "aligngan/gradcheck.hpp"

namespace aligngan {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitFailure = 2 };

struct CliOptions {
  /// Cases for the gradcheck command; standard_grad_cases when unset.
  std::function<std::vector<GradCase>(std::uint64_t seed)> grad_cases;
  /// Overrides ALIGNGAN_LOG when non-empty.
  std::string log_level;
};

/// Runs one command (args[0] is the program name). Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const CliOptions& options = {});

}  // namespace aligngan
