#pragma once

// Batch experiment runner: `renewlab <group> <command> --config file.json`.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace renewlab::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kBadConfig = 2,
  kPrecondition = 3,
  kToleranceFailure = 4,
};

/// args excludes the program name. Summaries go to `out` unless --quiet.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes) noexcept;

}  // namespace renewlab::cli
