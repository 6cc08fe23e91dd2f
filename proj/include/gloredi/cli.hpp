#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gloredi {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

/// Entry point shared by the `gloredi` executable and in-process tests.
/// `args` excludes the program name. Subcommands: gen-data, train, eval,
/// reconstruct, fbp. Returns 0 on success, 2 on usage/validation/format
/// errors, 3 on numerical or other runtime failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gloredi
