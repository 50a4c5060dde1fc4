#pragma once

#include <iosfwd>

namespace afrda::cli {

/// Entry point of the `afrda` command line tool. Returns the process exit code:
/// 0 on success, 1 on runtime failure, 2 on usage errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace afrda::cli
