#pragma once

#include <string>
#include <vector>

namespace p3 {

/// Entry point of the `p3` executable. Returns 0 on success, 1 on a usage
/// error and 2 when a stage's inputs are missing or unusable.
int run(int argc, const char* const* argv);

/// Convenience overload; args[0] is the program name.
int run(const std::vector<std::string>& args);

}  // namespace p3
