// Copyright 2026 The fixflow Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Exact rational reference for fixed-point casts and dense layers. Shares no
// code with the library: values are rationals, casts are written directly
// from the documented rounding and overflow rules.

#pragma once

#include <cstdint>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "fixflow/fixed_point.hpp"

namespace oracle {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

inline cpp_int pow2(int k) { return cpp_int(1) << k; }

inline cpp_rational pow2_rational(int k) {
  return k >= 0 ? cpp_rational(pow2(k)) : cpp_rational(cpp_int(1), pow2(-k));
}

inline cpp_int floor_div(const cpp_int& n, const cpp_int& d) {
  cpp_int q = n / d;  // truncates toward zero
  if ((n % d != 0) && ((n < 0) != (d < 0))) q -= 1;
  return q;
}

inline cpp_int floor_rational(const cpp_rational& r) {
  return floor_div(boost::multiprecision::numerator(r), boost::multiprecision::denominator(r));
}

inline cpp_rational value_of(std::int64_t raw, int fraction_bits) {
  return cpp_rational(raw) * pow2_rational(-fraction_bits);
}

// Raw integer for exact value v under spec.
inline std::int64_t cast(const cpp_rational& v, const fixflow::FixedPointSpec& s) {
  const cpp_rational scaled = v * pow2_rational(s.fraction_bits());
  cpp_int q = s.rounding == fixflow::Rounding::kTruncate
                  ? floor_rational(scaled)
                  : floor_rational(scaled + cpp_rational(1, 2));
  const cpp_int lo = s.is_signed ? -pow2(s.width - 1) : cpp_int(0);
  const cpp_int hi = s.is_signed ? pow2(s.width - 1) - 1 : pow2(s.width) - 1;
  if (s.overflow == fixflow::Overflow::kSaturate) {
    if (q > hi) q = hi;
    if (q < lo) q = lo;
  } else {
    const cpp_int m = pow2(s.width);
    q = q - floor_div(q - lo, m) * m;
  }
  return static_cast<std::int64_t>(q);
}

// acc = cast(b, acc); for each nonzero w_j: acc = wrap_or_sat(acc + cast(w_j * x_j, acc));
// y = cast(acc, result).
inline std::vector<std::int64_t> dense(const std::vector<std::int64_t>& w,
                                       const fixflow::FixedPointSpec& ws,
                                       const std::vector<std::int64_t>& b,
                                       const fixflow::FixedPointSpec& bs,
                                       const std::vector<std::int64_t>& x,
                                       const fixflow::FixedPointSpec& xs,
                                       const fixflow::FixedPointSpec& acc_spec,
                                       const fixflow::FixedPointSpec& result_spec) {
  const std::size_t n_out = b.size(), n_in = x.size();
  std::vector<std::int64_t> y(n_out);
  const int af = acc_spec.fraction_bits();
  // Adding two grid values never needs rounding, only overflow handling.
  fixflow::FixedPointSpec sum_spec = acc_spec;
  for (std::size_t i = 0; i < n_out; ++i) {
    std::int64_t acc = cast(value_of(b[i], bs.fraction_bits()), acc_spec);
    for (std::size_t j = 0; j < n_in; ++j) {
      const std::int64_t wij = w[i * n_in + j];
      if (wij == 0) continue;
      const cpp_rational product = value_of(wij, ws.fraction_bits()) * value_of(x[j], xs.fraction_bits());
      const std::int64_t term = cast(product, acc_spec);
      acc = cast(value_of(acc, af) + value_of(term, af), sum_spec);
    }
    y[i] = cast(value_of(acc, af), result_spec);
  }
  return y;
}

}  // namespace oracle
