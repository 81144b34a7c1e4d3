#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace jys::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kVerifyFailed = 2, kNumerical = 3 };

/// Runs the `jys` command line. Output that users read goes to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a, printed as 16 hex digits in output headers.
std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t v);

}  // namespace jys::cli
