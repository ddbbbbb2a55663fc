#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gdk::cli {

enum ExitCode : int { kSuccess = 0, kValidation = 1, kRuntime = 2 };

/// Entry point of the gdk tool. Results go to `out`, logs and diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gdk::cli
