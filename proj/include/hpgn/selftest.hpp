#pragma once

#include <ostream>

namespace hpgn {

/// Quick invariant suite. Prints one "PASS name" or "FAIL name: detail" line
/// per check and returns true when every check passed.
bool run_selftest(std::ostream& out);

}  // namespace hpgn
