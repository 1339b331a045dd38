#pragma once

#include <iosfwd>

namespace reflectrag {

/// Entry point of the `reflectrag` command: index, ask, eval, serve.
/// Returns 0 on success, 1 on a runtime error, 2 on a usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace reflectrag
