#pragma once

#include <boost/multiprecision/cpp_int.hpp>

namespace perminv {

using BigInt = boost::multiprecision::cpp_int;

/// Sizes of the state space of m objects drawn from n distinguishable values,
/// ordered (m-permutations) versus order-invariant (m-combinations).
struct StateSpaceSizes {
  BigInt ordered;    // n! / (n - m)!
  BigInt unordered;  // n! / (m! (n - m)!)
  // unordered / ordered in lowest terms; always 1 / m!.
  BigInt ratio_numerator;
  BigInt ratio_denominator;
};

/// Throws std::invalid_argument unless 1 <= m <= n.
StateSpaceSizes state_space_sizes(unsigned n, unsigned m);

BigInt factorial(unsigned n);

}  // namespace perminv
