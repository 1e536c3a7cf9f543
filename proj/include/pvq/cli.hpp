#pragma once

#include <ostream>

namespace pvq {

/// Entry point of the `pvq` command line. Errors are reported as one line on
/// `err` with a nonzero return value.
int run_cli(int argc, const char *const *argv, std::ostream &out,
            std::ostream &err);

} // namespace pvq
