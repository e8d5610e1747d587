#pragma once

#include <iostream>

namespace modemfuse {

// Entry point behind the modemfuse binary. Subcommands: sweep, classify,
// tables, plotdata. Returns 0 on success, 1 on input/usage errors, 2 when
// the numeric failure threshold is exceeded. Streams are injectable for
// in-process testing.
int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout,
             std::ostream& err = std::cerr);

}  // namespace modemfuse
