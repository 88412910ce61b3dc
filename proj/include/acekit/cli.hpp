#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace acekit {

// Runs one command line (without the program name). Returns the process exit
// code: 0 success, 2 usage, 3 data, 4 numerical. Errors are written to err as
// a JSON object.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace acekit
