#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lpflow::cli {

enum ExitCode : int {
    kOk = 0,
    kOther = 1,
    kConfig = 2,
    kNumerical = 3,
    kPipeline = 4,
};

/// Runs one subcommand; args excludes the program name. Reports go to `out`,
/// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lpflow::cli
