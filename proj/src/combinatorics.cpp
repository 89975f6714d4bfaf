#include "perminv/combinatorics.hpp"

#include <stdexcept>
#include <string>

namespace perminv {

BigInt factorial(unsigned n) {
  BigInt f = 1;
  for (unsigned i = 2; i <= n; ++i) f *= i;
  return f;
}

StateSpaceSizes state_space_sizes(unsigned n, unsigned m) {
  if (m < 1 || m > n) {
    throw std::invalid_argument("state_space_sizes: need 1 <= m <= n (got n=" +
                                std::to_string(n) + ", m=" + std::to_string(m) + ")");
  }
  StateSpaceSizes s;
  s.ordered = 1;
  for (unsigned i = 0; i < m; ++i) s.ordered *= (n - i);
  s.unordered = s.ordered / factorial(m);
  const BigInt g = boost::multiprecision::gcd(s.unordered, s.ordered);
  s.ratio_numerator = s.unordered / g;
  s.ratio_denominator = s.ordered / g;
  return s;
}

}  // namespace perminv
