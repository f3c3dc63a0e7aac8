#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace scenesmith {

struct CommandResult {
    int exit_code = -1;
    std::string output; // stdout
};

/// Single-quotes an argument for /bin/sh.
std::string shell_quote(std::string_view arg);

/// Runs `program args...` through the shell and captures stdout.
CommandResult run_command(const std::string& program, const std::vector<std::string>& args);

} // namespace scenesmith
