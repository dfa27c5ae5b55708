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

// Exact two's-complement fixed-point arithmetic.
//
// A FixedPointSpec describes a format fixed<W,I>: W total bits of which I
// are integer bits (sign included when signed). The fraction has W-I bits and
// may be negative (I > W) or exceed W (I <= 0). A value is a raw integer in
// that format; its real value is raw * 2^-(W-I).
//
// Every conversion funnels through one exact integer path: the source is an
// integer scaled by a power of two, it is rounded onto the target grid, then
// overflow is resolved. No step goes through floating point, so results are
// bit-reproducible on every platform.

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fixflow/errors.hpp"

namespace fixflow {

enum class Rounding { kTruncate, kRoundHalfUp };
enum class Overflow { kWrap, kSaturate };

struct FixedPointSpec {
  int width = 16;
  int integer_bits = 6;
  bool is_signed = true;
  Rounding rounding = Rounding::kTruncate;
  Overflow overflow = Overflow::kWrap;

  // Integer bits are limited so every scale shift stays a small int.
  static constexpr int kMaxScaleBits = 512;

  constexpr int fraction_bits() const { return width - integer_bits; }

  // Unsigned formats stop at 63 bits so raw values always fit int64_t.
  constexpr bool valid() const {
    const int max_width = is_signed ? 64 : 63;
    return width >= 1 && width <= max_width &&
           integer_bits >= -kMaxScaleBits && integer_bits <= kMaxScaleBits;
  }

  constexpr std::int64_t max_raw() const {
    const int magnitude_bits = is_signed ? width - 1 : width;
    if (magnitude_bits == 63) return std::numeric_limits<std::int64_t>::max();
    return (std::int64_t{1} << magnitude_bits) - 1;
  }

  constexpr std::int64_t min_raw() const {
    if (!is_signed) return 0;
    if (width == 64) return std::numeric_limits<std::int64_t>::min();
    return -(std::int64_t{1} << (width - 1));
  }

  double lsb() const { return std::ldexp(1.0, -fraction_bits()); }
  double max_real() const {
    return std::ldexp(static_cast<double>(max_raw()), -fraction_bits());
  }
  double min_real() const {
    return std::ldexp(static_cast<double>(min_raw()), -fraction_bits());
  }

  // Canonical text form, e.g. "fixed<16,6>" or "fixed<6,1,u,rnd,sat>".
  std::string to_string() const;

  // Accepts "fixed<W,I[,u|s][,rnd|trn][,sat|wrap]>"; option tokens may come in
  // any order. Throws std::invalid_argument on malformed text.
  static FixedPointSpec parse(std::string_view text);

  friend bool operator==(const FixedPointSpec&,
                         const FixedPointSpec&) = default;
};

struct FixedPointValue {
  std::int64_t raw = 0;
  FixedPointSpec spec;

  double to_real() const {
    return std::ldexp(static_cast<double>(raw), -spec.fraction_bits());
  }
  friend bool operator==(const FixedPointValue&,
                         const FixedPointValue&) = default;
};

// Exact product of two values. Widths add, fraction bits add; the raw value
// needs at most 127 bits because operands are at most 64 bits wide.
struct ProductValue {
  __int128 raw = 0;
  int width = 0;
  int fraction_bits = 0;
  bool is_signed = true;

  double to_real() const {
    return std::ldexp(static_cast<double>(raw), -fraction_bits);
  }
};

namespace detail {

using i128 = __int128;
using u128 = unsigned __int128;

// v * 2^shift rounded to an integer. When the exact result does not fit in
// 128 bits, `fits` is false and `value` holds it modulo 2^128 (enough for
// wrap overflow, which only keeps the low bits); `sign` is always exact.
struct Scaled {
  i128 value = 0;
  bool fits = true;
  int sign = 0;
};

inline Scaled scale_round(i128 v, int shift, Rounding rounding) {
  if (v == 0) return {};
  const int sign = v < 0 ? -1 : 1;
  if (shift >= 0) {
    if (shift >= 128) return {0, false, sign};
    const i128 shifted = static_cast<i128>(static_cast<u128>(v) << shift);
    bool fits = true;
    if (shift >= 127) {
      fits = false;
    } else if (shift > 0) {
      const i128 bound = static_cast<i128>(1) << (127 - shift);
      fits = v >= -bound && v < bound;
    }
    return {shifted, fits, sign};
  }
  const int s = -shift;
  if (s >= 128) {
    // |v| < 2^127 <= 2^(s-1): floor gives -1 or 0, round-half-up gives 0.
    const i128 q = rounding == Rounding::kTruncate && v < 0 ? -1 : 0;
    return {q, true, q == 0 ? 0 : -1};
  }
  i128 q = v >> s;
  if (rounding == Rounding::kRoundHalfUp) q += (v >> (s - 1)) & 1;
  return {q, true, q == 0 ? 0 : (q < 0 ? -1 : 1)};
}

// Resolves overflow of an integer already on the target grid.
inline std::int64_t fit_to_spec(const Scaled& s, const FixedPointSpec& spec) {
  if (spec.overflow == Overflow::kSaturate) {
    if (!s.fits) return s.sign > 0 ? spec.max_raw() : spec.min_raw();
    if (s.value > spec.max_raw()) return spec.max_raw();
    if (s.value < spec.min_raw()) return spec.min_raw();
    return static_cast<std::int64_t>(s.value);
  }
  std::uint64_t low = static_cast<std::uint64_t>(static_cast<u128>(s.value));
  if (spec.width < 64) {
    const std::uint64_t mask = (std::uint64_t{1} << spec.width) - 1;
    low &= mask;
    if (spec.is_signed && (low >> (spec.width - 1)) != 0) {
      return static_cast<std::int64_t>(low | ~mask);
    }
    return static_cast<std::int64_t>(low);
  }
  return static_cast<std::int64_t>(low);
}

inline std::int64_t rescale(i128 raw, int from_fraction_bits,
                            const FixedPointSpec& spec) {
  return fit_to_spec(
      scale_round(raw, spec.fraction_bits() - from_fraction_bits,
                  spec.rounding),
      spec);
}

inline void require_valid(const FixedPointSpec& spec) {
  if (!spec.valid()) {
    throw std::invalid_argument("invalid fixed-point spec " +
                                spec.to_string());
  }
}

}  // namespace detail

// Rounds x onto the spec's grid, then resolves overflow. Exact: the double is
// decomposed into an integer mantissa and a power of two first.
inline FixedPointValue quantize(double x, const FixedPointSpec& spec) {
  if (!std::isfinite(x)) {
    throw std::invalid_argument("quantize: non-finite input");
  }
  if (x == 0.0) return {0, spec};
  int exponent = 0;
  const double mantissa = std::frexp(x, &exponent);
  const auto integer_mantissa =
      static_cast<std::int64_t>(std::ldexp(mantissa, 53));
  return {detail::rescale(integer_mantissa, 53 - exponent, spec), spec};
}

inline FixedPointValue cast(const FixedPointValue& v,
                            const FixedPointSpec& spec) {
  return {detail::rescale(v.raw, v.spec.fraction_bits(), spec), spec};
}

inline FixedPointValue cast(const ProductValue& p, const FixedPointSpec& spec) {
  return {detail::rescale(p.raw, p.fraction_bits, spec), spec};
}

// Exact product; no rounding ever happens here.
inline ProductValue mul(const FixedPointValue& a, const FixedPointValue& b) {
  return {static_cast<detail::i128>(a.raw) * b.raw, a.spec.width + b.spec.width,
          a.spec.fraction_bits() + b.spec.fraction_bits(),
          a.spec.is_signed || b.spec.is_signed};
}

// Sum of two values already in the same spec; only overflow can occur.
inline FixedPointValue add_same_spec(const FixedPointValue& a,
                                     const FixedPointValue& b) {
  const detail::i128 sum = static_cast<detail::i128>(a.raw) + b.raw;
  const detail::Scaled s{sum, true, sum == 0 ? 0 : (sum < 0 ? -1 : 1)};
  return {detail::fit_to_spec(s, a.spec), a.spec};
}

// One accumulation step of the reduction contract: the exact product is cast
// into the accumulator spec, then added with the accumulator's overflow mode.
inline FixedPointValue accumulate(const FixedPointValue& acc,
                                  const ProductValue& product) {
  return add_same_spec(acc, cast(product, acc.spec));
}

// Exact sum of arbitrary values followed by a single cast. Throws
// std::overflow_error if aligning the operands needs more than 127 bits.
inline FixedPointValue sum_then_cast(std::span<const FixedPointValue> values,
                                     const FixedPointSpec& spec) {
  if (values.empty()) return {0, spec};
  int finest = values.front().spec.fraction_bits();
  for (const auto& v : values) finest = std::max(finest, v.spec.fraction_bits());
  detail::i128 total = 0;
  for (const auto& v : values) {
    const int shift = finest - v.spec.fraction_bits();
    const auto scaled = detail::scale_round(v.raw, shift, Rounding::kTruncate);
    if (!scaled.fits ||
        __builtin_add_overflow(total, scaled.value, &total)) {
      throw std::overflow_error("sum_then_cast: exact sum exceeds 127 bits");
    }
  }
  return {detail::rescale(total, finest, spec), spec};
}

inline FixedPointValue add(const FixedPointValue& a, const FixedPointValue& b,
                           const FixedPointSpec& spec) {
  const FixedPointValue pair[] = {a, b};
  return sum_then_cast(pair, spec);
}

// Binary networks encode -1 as bit 0 and +1 as bit 1; the product of two
// encoded values is then their XNOR.
using BinaryBit = std::uint8_t;

constexpr BinaryBit encode_binary(int value) { return value >= 0 ? 1 : 0; }
constexpr int decode_binary(BinaryBit bit) { return bit != 0 ? 1 : -1; }

constexpr BinaryBit xnor_product(BinaryBit a, BinaryBit b) {
  return static_cast<BinaryBit>(~(a ^ b) & 1u);
}

// Dot product of two packed {-1,+1} vectors of `length` entries (bit i of
// word i/64): matches - mismatches = 2 * popcount(xnor) - length.
inline long xnor_dot(std::span<const std::uint64_t> a,
                     std::span<const std::uint64_t> b, std::size_t length) {
  if (a.size() != b.size() || a.size() * 64 < length) {
    throw std::invalid_argument("xnor_dot: packed length mismatch");
  }
  long matches = 0;
  for (std::size_t w = 0; w < a.size(); ++w) {
    std::uint64_t agree = ~(a[w] ^ b[w]);
    const std::size_t begin = w * 64;
    const std::size_t used =
        length > begin ? std::min<std::size_t>(64, length - begin) : 0;
    if (used < 64) agree &= (std::uint64_t{1} << used) - 1;
    matches += std::popcount(agree);
  }
  return 2 * matches - static_cast<long>(length);
}

inline std::string FixedPointSpec::to_string() const {
  std::string s = "fixed<" + std::to_string(width) + "," +
                  std::to_string(integer_bits);
  if (!is_signed) s += ",u";
  if (rounding == Rounding::kRoundHalfUp) s += ",rnd";
  if (overflow == Overflow::kSaturate) s += ",sat";
  return s + ">";
}

inline FixedPointSpec FixedPointSpec::parse(std::string_view text) {
  auto fail = [&](const std::string& why) -> FixedPointSpec {
    throw std::invalid_argument("bad precision '" + std::string(text) +
                                "': " + why);
  };
  std::string compact;
  for (char c : text) {
    if (c != ' ' && c != '\t') compact.push_back(c);
  }
  constexpr std::string_view kPrefix = "fixed<";
  if (!compact.starts_with(kPrefix) || !compact.ends_with('>')) {
    return fail("expected fixed<W,I,...>");
  }
  const std::string body =
      compact.substr(kPrefix.size(), compact.size() - kPrefix.size() - 1);
  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = body.find(',', start);
    tokens.push_back(body.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (tokens.size() < 2) return fail("width and integer bits are required");
  auto parse_int = [&](const std::string& token) {
    if (token.empty()) fail("empty number");
    std::size_t used = 0;
    int value = 0;
    try {
      value = std::stoi(token, &used);
    } catch (const std::exception&) {
      fail("not a number: " + token);
    }
    if (used != token.size()) fail("not a number: " + token);
    return value;
  };
  FixedPointSpec spec;
  spec.width = parse_int(tokens[0]);
  spec.integer_bits = parse_int(tokens[1]);
  bool seen_sign = false, seen_round = false, seen_overflow = false;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    const std::string& t = tokens[i];
    if (t == "u" || t == "s") {
      if (seen_sign) fail("duplicate signedness");
      seen_sign = true;
      spec.is_signed = t == "s";
    } else if (t == "rnd" || t == "trn") {
      if (seen_round) fail("duplicate rounding");
      seen_round = true;
      spec.rounding = t == "rnd" ? Rounding::kRoundHalfUp : Rounding::kTruncate;
    } else if (t == "sat" || t == "wrap") {
      if (seen_overflow) fail("duplicate overflow");
      seen_overflow = true;
      spec.overflow = t == "sat" ? Overflow::kSaturate : Overflow::kWrap;
    } else {
      fail("unknown option '" + t + "'");
    }
  }
  if (!spec.valid()) fail("width out of range");
  return spec;
}

}  // namespace fixflow
