#pragma once

// Command-line front end. Exit codes: 0 success / witness found, 1 runtime
// failure, 2 search budget exhausted, 3 config error, 4 verification failure.

#include <ostream>
#include <string>
#include <vector>

namespace pendwit {

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pendwit
