#pragma once

#include <string>
#include <vector>

namespace glassboxize {}

namespace glassbox::cli {

// Full command-line entry point; argv follows main() conventions.
int run(int argc, const char* const* argv);

// Convenience for tests.
int run(const std::vector<std::string>& args);

}  // namespace glassbox::cli
