#pragma once

#include <iosfwd>

namespace seqht::cli {

/// Exit codes: 0 success, 1 unexpected failure, 2 configuration or input
/// error, 3 numerical or rank error, 4 nontermination.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace seqht::cli
