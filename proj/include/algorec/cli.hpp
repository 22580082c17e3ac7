#pragma once

#include <iosfwd>

namespace algorec::cli {

/// Runs one subcommand (bench, loo, metafeatures, recommend, serve, synth).
/// Returns 0 on success, 2 on a usage error and 1 on a runtime failure;
/// errors are written to `err` as a one-line JSON object.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace algorec::cli
