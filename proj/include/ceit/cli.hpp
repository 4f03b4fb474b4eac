#pragma once

// Command-line front end: `ceit <subcommand> [options]`.
//
// Exit codes: 0 success, 1 computation error (JSON diagnostic on the error
// stream), 2 usage error.

#include <iosfwd>

namespace ceit {

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int parse_and_dispatch(int argc, const char* const* argv);

}  // namespace ceit
