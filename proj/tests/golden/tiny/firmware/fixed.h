// Fixed-point support for generated models. Values are raw integers on a
// grid of 2^-frac; a Spec describes width, grid and rounding/overflow modes.
#ifndef FIXFLOW_FIXED_H_
#define FIXFLOW_FIXED_H_

#include <cstdint>

namespace fxf {

typedef __int128 i128;
typedef unsigned __int128 u128;

struct Spec {
  int width;
  int frac;
  bool is_signed;
  bool round;     // round half up; otherwise truncate toward -inf
  bool saturate;  // otherwise wrap
};

inline std::int64_t max_raw(const Spec& s) {
  const int m = s.is_signed ? s.width - 1 : s.width;
  return m == 63 ? INT64_MAX : (std::int64_t(1) << m) - 1;
}

inline std::int64_t min_raw(const Spec& s) {
  if (!s.is_signed) return 0;
  return s.width == 64 ? INT64_MIN : -(std::int64_t(1) << (s.width - 1));
}

struct Scaled {
  i128 value;
  bool fits;
  int sign;
};

inline Scaled scale_round(i128 v, int shift, bool round) {
  Scaled r = {0, true, 0};
  if (v == 0) return r;
  const int sign = v < 0 ? -1 : 1;
  if (shift >= 0) {
    if (shift >= 128) {
      r.fits = false;
      r.sign = sign;
      return r;
    }
    r.value = i128(u128(v) << shift);
    r.sign = sign;
    if (shift >= 127) {
      r.fits = false;
    } else if (shift > 0) {
      const i128 bound = i128(1) << (127 - shift);
      r.fits = v >= -bound && v < bound;
    }
    return r;
  }
  const int s = -shift;
  if (s >= 128) {
    r.value = (!round && v < 0) ? -1 : 0;
    r.sign = r.value == 0 ? 0 : -1;
    return r;
  }
  i128 q = v >> s;
  if (round) q += (v >> (s - 1)) & 1;
  r.value = q;
  r.sign = q == 0 ? 0 : (q < 0 ? -1 : 1);
  return r;
}

inline std::int64_t fit(const Scaled& v, const Spec& s) {
  if (s.saturate) {
    if (!v.fits) return v.sign > 0 ? max_raw(s) : min_raw(s);
    if (v.value > max_raw(s)) return max_raw(s);
    if (v.value < min_raw(s)) return min_raw(s);
    return std::int64_t(v.value);
  }
  std::uint64_t low = std::uint64_t(u128(v.value));
  if (s.width < 64) {
    const std::uint64_t mask = (std::uint64_t(1) << s.width) - 1;
    low &= mask;
    if (s.is_signed && (low >> (s.width - 1)) != 0) return std::int64_t(low | ~mask);
  }
  return std::int64_t(low);
}

inline std::int64_t rescale(i128 raw, int from_frac, const Spec& s) {
  return fit(scale_round(raw, s.frac - from_frac, s.round), s);
}

inline std::int64_t add(std::int64_t a, std::int64_t b, const Spec& s) {
  const i128 sum = i128(a) + b;
  Scaled v = {sum, true, sum == 0 ? 0 : (sum < 0 ? -1 : 1)};
  return fit(v, s);
}

// acc + cast(w * x, acc)
inline std::int64_t mac(std::int64_t acc, std::int64_t w, int w_frac, std::int64_t x, int x_frac,
                        const Spec& acc_spec) {
  return add(acc, rescale(i128(w) * x, w_frac + x_frac, acc_spec), acc_spec);
}

struct CooEntry {
  std::uint64_t index;  // out * n_in + in
  std::int64_t raw;
};

enum { kAlways = 0, kNever = 1, kAtLeast = 2, kAtMost = 3 };

struct Pred {
  int kind;
  std::int64_t bound;
};

inline bool test(const Pred& p, std::int64_t raw) {
  switch (p.kind) {
    case kAlways: return true;
    case kAtLeast: return raw >= p.bound;
    case kAtMost: return raw <= p.bound;
    default: return false;
  }
}

inline void cast_vector(const std::int64_t* x, int x_frac, int n, const Spec& out,
                        std::int64_t* y) {
  for (int i = 0; i < n; ++i) y[i] = rescale(x[i], x_frac, out);
}

inline void dense(const std::int64_t* x, int x_frac, const std::int64_t* w, const Spec& w_spec,
                  const std::int64_t* b, const Spec& b_spec, int n_in, int n_out,
                  const Spec& acc_spec, const Spec& res_spec, std::int64_t* y) {
  for (int i = 0; i < n_out; ++i) {
    std::int64_t acc = rescale(b[i], b_spec.frac, acc_spec);
    const std::int64_t* row = w + i * n_in;
    for (int j = 0; j < n_in; ++j) {
      if (row[j] == 0) continue;
      acc = mac(acc, row[j], w_spec.frac, x[j], x_frac, acc_spec);
    }
    y[i] = rescale(acc, acc_spec.frac, res_spec);
  }
}

// Sparse variant over nonzero entries in ascending index order. `acc`
// needs n_out entries of scratch.
inline void dense_coo(const std::int64_t* x, int x_frac, const CooEntry* w, int nnz,
                      const Spec& w_spec, const std::int64_t* b, const Spec& b_spec, int n_in,
                      int n_out, const Spec& acc_spec, const Spec& res_spec, std::int64_t* acc,
                      std::int64_t* y) {
  for (int i = 0; i < n_out; ++i) acc[i] = rescale(b[i], b_spec.frac, acc_spec);
  for (int k = 0; k < nnz; ++k) {
    const int row = int(w[k].index / std::uint64_t(n_in));
    const int col = int(w[k].index % std::uint64_t(n_in));
    acc[row] = mac(acc[row], w[k].raw, w_spec.frac, x[col], x_frac, acc_spec);
  }
  for (int i = 0; i < n_out; ++i) y[i] = rescale(acc[i], acc_spec.frac, res_spec);
}

inline void relu(const std::int64_t* x, int x_frac, int n, const Spec& out, std::int64_t* y) {
  for (int i = 0; i < n; ++i) y[i] = x[i] > 0 ? rescale(x[i], x_frac, out) : 0;
}

inline void batch_norm(const std::int64_t* x, int x_frac, const std::int64_t* scale,
                       const Spec& scale_spec, const std::int64_t* shift, const Spec& shift_spec,
                       int n, const Spec& acc_spec, const Spec& res_spec, std::int64_t* y) {
  for (int i = 0; i < n; ++i) {
    std::int64_t acc = rescale(shift[i], shift_spec.frac, acc_spec);
    acc = mac(acc, scale[i], scale_spec.frac, x[i], x_frac, acc_spec);
    y[i] = rescale(acc, acc_spec.frac, res_spec);
  }
}

// +1 where pos holds, else -1 where neg holds (when given), else 0 or -1.
inline void sign_select(const std::int64_t* x, int n, const Pred* pos, const Pred* neg,
                        std::int64_t one, std::int64_t minus_one, std::int64_t* y) {
  for (int i = 0; i < n; ++i) {
    if (test(pos[i], x[i])) {
      y[i] = one;
    } else if (neg == 0) {
      y[i] = minus_one;
    } else {
      y[i] = test(neg[i], x[i]) ? minus_one : 0;
    }
  }
}

}  // namespace fxf

#endif  // FIXFLOW_FIXED_H_
