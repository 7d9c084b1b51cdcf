#pragma once

#include <ostream>

namespace coach::cli {

/// One command-line invocation. Every run prints the resolved config as one
/// JSON line on `out`; failures print one JSON line {"error", "message"} on
/// `err` and return nonzero (2 for usage errors).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace coach::cli
