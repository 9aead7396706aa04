// cli_app.hpp — the `bpre` command line, callable in-process for tests.

#pragma once

#include <string>
#include <vector>

namespace bpre {

// argv without the program name; returns the process exit code:
//   0 success / verified, 1 verification failed, 2 invalid model or arguments,
//   3 internal error, 4 infeasible sample budget
int run_cli(const std::vector<std::string>& args);

}  // namespace bpre
