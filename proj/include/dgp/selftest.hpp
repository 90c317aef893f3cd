#ifndef DGP_SELFTEST_HPP_
#define DGP_SELFTEST_HPP_

#include <cstdint>
#include <ostream>

namespace dgp {

// Fast in-process invariant checks (sharding equivalence, weight
// normalisation, dense-inverse agreement, determinism). Prints one line per
// check and returns the number of failures.
int run_selftest(std::ostream& out, std::uint64_t seed = 1);

}  // namespace dgp

#endif  // DGP_SELFTEST_HPP_
