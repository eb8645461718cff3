#pragma once

#include <ostream>

namespace tide {

/// Entry point of the `tide` tool. Returns 0 on success, 1 on runtime
/// errors and 2 on usage errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tide
