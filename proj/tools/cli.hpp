#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace drivemap::tools {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;

/// Machine-readable JSON outputs carry this version.
inline constexpr int kSchemaVersion = 1;

/// Runs one command. `args` excludes the program name. Every parsed run writes one
/// effective-config JSON line to `err` before doing any work.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace drivemap::tools
