#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sdpc::cli {

// Exit codes: 0 success, 1 usage, 2 format/I-O, 3 numeric failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace sdpc::cli
