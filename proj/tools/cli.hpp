#pragma once

#include <iosfwd>

namespace rome::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_threshold = 2;

/// Entry point shared by the `rome` binary and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rome::cli
