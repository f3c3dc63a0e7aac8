#include <scenesmith/process.hpp>
#include <scenesmith/errors.hpp>

#include <array>
#include <cstdio>
#include <sys/wait.h>

namespace scenesmith {

std::string shell_quote(std::string_view arg)
{
    std::string out = "'";
    for (char c : arg) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    return out + "'";
}

CommandResult run_command(const std::string& program, const std::vector<std::string>& args)
{
    // the program string may itself carry arguments, so it is not quoted
    std::string cmd = program;
    for (const auto& a : args) cmd += " " + shell_quote(a);
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) throw Error("cannot start command: " + program);
    CommandResult res;
    std::array<char, 4096> buf{};
    size_t got = 0;
    while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) res.output.append(buf.data(), got);
    const int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

} // namespace scenesmith
