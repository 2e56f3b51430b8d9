#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ppcm::cli {

enum ExitCode : int {
    ok = 0,
    internal_error = 1,
    usage_error = 2,
    io_error = 3,
    parse_error = 4,
    key_mismatch = 5,
    invalid_argument = 6,
    shape_error = 7,
};

/// Runs the `ppcm` command line. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace ppcm::cli
