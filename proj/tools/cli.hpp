#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vaetpp::cli {

/// Runs one command line. Returns 0 on success, 1 on a usage or validation
/// error and 2 when training or I/O fails at run time.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace vaetpp::cli
