// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace usn {

/// A linear boundary functional u -> u^(order)(x_end), expressed on the
/// Chebyshev T coefficients of u on [-1, 1].
///
/// `side` is -1 for the left endpoint and +1 for the right one. `scale` is
/// the chain-rule factor (2 / (b - a))^order of the domain map.
struct BoundaryRow {
  int side = -1;
  int order = 0;
  double scale = 1.0;

  /// Value of the functional on T_k.
  double entry(std::size_t k) const noexcept;
  /// First n entries as a dense row.
  std::vector<double> row(std::size_t n) const;
  /// Functional applied to a coefficient vector.
  double apply(std::span<const double> coeffs) const noexcept;
};

}  // namespace usn
