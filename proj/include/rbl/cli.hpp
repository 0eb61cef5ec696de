#pragma once

#include <ostream>

namespace rbl {

// Exit codes: 0 success, 1 finished but at least one tooth was unmeasurable,
// 2 input or usage error, 3 internal failure. Errors are also printed to `err`
// as one JSON object per line.
enum ExitCode : int { kExitOk = 0, kExitUnmeasurable = 1, kExitInputError = 2, kExitInternal = 3 };

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rbl
