#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace decenergy::cli {

// One subcommand's result: the exit code plus the same report in both
// renderings. The machine rendering carries every number the text shows,
// at full double precision.
struct CommandOutcome {
    int exit_code = 0;
    std::string text;
    nlohmann::ordered_json machine;
};

// Parses and runs one invocation. args excludes the program name; the chosen
// rendering goes to out, errors and parse warnings to err. Exit codes:
// 0 success, 1 validation failure, 2 numeric/degenerate failure, 3 I/O failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace decenergy::cli
