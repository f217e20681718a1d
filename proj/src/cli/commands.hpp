#pragma once

#include "config.hpp"

#include <optional>
#include <string>
#include <vector>

namespace skewfb::cli {

struct Artifact {
    std::string name;
    std::string content;
};

struct CommandOutput {
    std::vector<Artifact> artifacts;
    std::optional<std::uint64_t> seed;  // master seed actually used
    /// Set by `validate` when a checked invariant fails; artifacts are still written.
    std::vector<std::string> violations;
};

const std::vector<std::string>& command_names();

/// Executes `command` on a parsed config. Throws skewfb::Error subclasses.
CommandOutput run_command(const std::string& command, const Json& cfg, const Overrides& o);

}  // namespace skewfb::cli
