#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace skewfb::cli {

inline constexpr const char* kVersion = "0.1.0";
/// Output root used when --out is absent: $SKEWFB_OUT_ROOT/<command>,
/// falling back to ./runs/<command>.
inline constexpr const char* kOutRootEnv = "SKEWFB_OUT_ROOT";

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,  // unexpected internal failure
    kConfig = 2,
    kNumerical = 3,
    kInvariant = 4,
};

/// Runs one subcommand. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string sha256_hex(std::string_view data);

}  // namespace skewfb::cli
