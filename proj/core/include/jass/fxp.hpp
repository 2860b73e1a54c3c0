// Configurable-width two's-complement fixed-point scalars plus the rounding
// and overflow rules shared by every datapath block. A value is raw * 2^-frac.
#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>

namespace jass::fxp {

using i64 = std::int64_t;
using i128 = __int128;
using u128 = unsigned __int128;

enum class Overflow : std::uint8_t { saturate, wrap };
// truncate = toward negative infinity (plain arithmetic shift),
// nearest_even = round half to even.
enum class Rounding : std::uint8_t { truncate, nearest_even };

struct FxFormat {
  int total_bits = 34;
  int frac_bits = 20;
  Overflow overflow = Overflow::saturate;
  Rounding rounding = Rounding::nearest_even;

  friend bool operator==(const FxFormat& a, const FxFormat& b) {
    return a.total_bits == b.total_bits && a.frac_bits == b.frac_bits &&
           a.overflow == b.overflow && a.rounding == b.rounding;
  }
  bool valid() const {
    return total_bits >= 2 && total_bits <= 64 && frac_bits >= 0 &&
           frac_bits < total_bits;
  }
  i64 max_raw() const { return (i64(1) << (total_bits - 1)) - 1; }
  i64 min_raw() const { return -(i64(1) << (total_bits - 1)); }
  double lsb() const { return std::ldexp(1.0, -frac_bits); }
};

struct FxReal {
  i64 raw = 0;
  FxFormat fmt{};
};

// re and im always share one format.
struct FxComplex {
  FxReal re{}, im{};
};

namespace detail {

// Shift right by k >= 0 with the requested rounding. Truncation is an
// arithmetic shift; nearest-even adds half an LSB and breaks ties to even.
inline i128 shift_right_rounded(i128 v, int k, Rounding r) {
  if (k <= 0) return k == 0 ? v : v << (-k);
  i128 q = v >> k;  // floor
  if (r == Rounding::nearest_even) {
    const i128 rem = v - (q << k);
    const i128 half = i128(1) << (k - 1);
    if (rem > half || (rem == half && (q & 1))) q += 1;
  }
  return q;
}

inline i64 apply_overflow(i128 v, const FxFormat& f) {
  const i128 hi = (i128(1) << (f.total_bits - 1)) - 1;
  const i128 lo = -(i128(1) << (f.total_bits - 1));
  if (v >= lo && v <= hi) return static_cast<i64>(v);
  if (f.overflow == Overflow::saturate) return static_cast<i64>(v > hi ? hi : lo);
  // wrap: keep the low total_bits and sign-extend
  const u128 mask = (u128(1) << f.total_bits) - 1;
  u128 keep = static_cast<u128>(v) & mask;
  if (keep & (u128(1) << (f.total_bits - 1))) keep |= ~mask;
  return static_cast<i64>(static_cast<i128>(keep));
}

// One rounding point: value is raw * 2^-src_frac, result lands in fmt.
inline i64 renormalize(i128 raw, int src_frac, const FxFormat& fmt) {
  const int delta = src_frac - fmt.frac_bits;
  const i128 shifted = delta >= 0 ? shift_right_rounded(raw, delta, fmt.rounding)
                                  : raw << (-delta);
  return apply_overflow(shifted, fmt);
}

}  // namespace detail

inline double value(const FxReal& x) {
  return std::ldexp(static_cast<double>(x.raw), -x.fmt.frac_bits);
}

inline FxReal from_raw(i64 raw, const FxFormat& fmt) { return FxReal{raw, fmt}; }

// Nearest representable per fmt.rounding; overflow per fmt.overflow.
inline FxReal quantize(double x, const FxFormat& fmt) {
  assert(fmt.valid() && std::isfinite(x));
  const double scaled = std::ldexp(x, fmt.frac_bits);
  // Values beyond +-2^63 cannot round-trip through i128 arithmetic safely;
  // they are out of range for every representable format anyway.
  if (scaled >= 9.2e18) return FxReal{detail::apply_overflow((i128(1) << 100), fmt), fmt};
  if (scaled <= -9.2e18) return FxReal{detail::apply_overflow(-(i128(1) << 100), fmt), fmt};
  double r = fmt.rounding == Rounding::nearest_even ? std::nearbyint(scaled)
                                                    : std::floor(scaled);
  return FxReal{detail::apply_overflow(static_cast<i128>(r), fmt), fmt};
}

inline FxReal requantize(const FxReal& x, const FxFormat& fmt) {
  return FxReal{detail::renormalize(x.raw, x.fmt.frac_bits, fmt), fmt};
}

inline FxReal fx_add(const FxReal& a, const FxReal& b, const FxFormat& out) {
  // align exactly at the finer fraction, round once into out
  const int m = a.fmt.frac_bits > b.fmt.frac_bits ? a.fmt.frac_bits : b.fmt.frac_bits;
  const i128 s = (i128(a.raw) << (m - a.fmt.frac_bits)) +
                 (i128(b.raw) << (m - b.fmt.frac_bits));
  return FxReal{detail::renormalize(s, m, out), out};
}

inline FxReal fx_sub(const FxReal& a, const FxReal& b, const FxFormat& out) {
  const int m = a.fmt.frac_bits > b.fmt.frac_bits ? a.fmt.frac_bits : b.fmt.frac_bits;
  const i128 s = (i128(a.raw) << (m - a.fmt.frac_bits)) -
                 (i128(b.raw) << (m - b.fmt.frac_bits));
  return FxReal{detail::renormalize(s, m, out), out};
}

inline FxReal fx_mul(const FxReal& a, const FxReal& b, const FxFormat& out) {
  const i128 p = i128(a.raw) * b.raw;
  return FxReal{detail::renormalize(p, a.fmt.frac_bits + b.fmt.frac_bits, out), out};
}

// Full-precision cross products, one rounding point per component.
inline FxComplex fx_cmul(const FxComplex& a, const FxComplex& b, const FxFormat& out) {
  const int pf = a.re.fmt.frac_bits + b.re.fmt.frac_bits;
  const i128 re = i128(a.re.raw) * b.re.raw - i128(a.im.raw) * b.im.raw;
  const i128 im = i128(a.re.raw) * b.im.raw + i128(a.im.raw) * b.re.raw;
  return FxComplex{FxReal{detail::renormalize(re, pf, out), out},
                   FxReal{detail::renormalize(im, pf, out), out}};
}

// acc + a*b with one rounding point per component (the PE multiply-add).
inline FxComplex fx_cmac(const FxComplex& acc, const FxComplex& a,
                         const FxComplex& b, const FxFormat& out) {
  const int pf = a.re.fmt.frac_bits + b.re.fmt.frac_bits;
  const int af = acc.re.fmt.frac_bits;
  const int m = pf > af ? pf : af;
  const i128 re = ((i128(a.re.raw) * b.re.raw - i128(a.im.raw) * b.im.raw) << (m - pf)) +
                  (i128(acc.re.raw) << (m - af));
  const i128 im = ((i128(a.re.raw) * b.im.raw + i128(a.im.raw) * b.re.raw) << (m - pf)) +
                  (i128(acc.im.raw) << (m - af));
  return FxComplex{FxReal{detail::renormalize(re, m, out), out},
                   FxReal{detail::renormalize(im, m, out), out}};
}

// acc - a*b, the multiply-subtract configuration used by rank-one updates.
inline FxComplex fx_cmsub(const FxComplex& acc, const FxComplex& a,
                          const FxComplex& b, const FxFormat& out) {
  const int pf = a.re.fmt.frac_bits + b.re.fmt.frac_bits;
  const int af = acc.re.fmt.frac_bits;
  const int m = pf > af ? pf : af;
  const i128 re = (i128(acc.re.raw) << (m - af)) -
                  ((i128(a.re.raw) * b.re.raw - i128(a.im.raw) * b.im.raw) << (m - pf));
  const i128 im = (i128(acc.im.raw) << (m - af)) -
                  ((i128(a.re.raw) * b.im.raw + i128(a.im.raw) * b.re.raw) << (m - pf));
  return FxComplex{FxReal{detail::renormalize(re, m, out), out},
                   FxReal{detail::renormalize(im, m, out), out}};
}

// Conjugating variants: a * conj(b), acc +- a * conj(b). The conjugation is
// folded into the widened multiplier (sign flip on the cross terms), so it is
// exact even when b.im sits at the format's most negative raw value — a
// standalone fx_conj would have to saturate there.
inline FxComplex fx_cmulc(const FxComplex& a, const FxComplex& b, const FxFormat& out) {
  const int pf = a.re.fmt.frac_bits + b.re.fmt.frac_bits;
  const i128 re = i128(a.re.raw) * b.re.raw + i128(a.im.raw) * b.im.raw;
  const i128 im = i128(a.im.raw) * b.re.raw - i128(a.re.raw) * b.im.raw;
  return FxComplex{FxReal{detail::renormalize(re, pf, out), out},
                   FxReal{detail::renormalize(im, pf, out), out}};
}

inline FxComplex fx_cmacc(const FxComplex& acc, const FxComplex& a,
                          const FxComplex& b, const FxFormat& out) {
  const int pf = a.re.fmt.frac_bits + b.re.fmt.frac_bits;
  const int af = acc.re.fmt.frac_bits;
  const int m = pf > af ? pf : af;
  const i128 re = ((i128(a.re.raw) * b.re.raw + i128(a.im.raw) * b.im.raw) << (m - pf)) +
                  (i128(acc.re.raw) << (m - af));
  const i128 im = ((i128(a.im.raw) * b.re.raw - i128(a.re.raw) * b.im.raw) << (m - pf)) +
                  (i128(acc.im.raw) << (m - af));
  return FxComplex{FxReal{detail::renormalize(re, m, out), out},
                   FxReal{detail::renormalize(im, m, out), out}};
}

inline FxComplex fx_cmsubc(const FxComplex& acc, const FxComplex& a,
                           const FxComplex& b, const FxFormat& out) {
  const int pf = a.re.fmt.frac_bits + b.re.fmt.frac_bits;
  const int af = acc.re.fmt.frac_bits;
  const int m = pf > af ? pf : af;
  const i128 re = (i128(acc.re.raw) << (m - af)) -
                  ((i128(a.re.raw) * b.re.raw + i128(a.im.raw) * b.im.raw) << (m - pf));
  const i128 im = (i128(acc.im.raw) << (m - af)) -
                  ((i128(a.im.raw) * b.re.raw - i128(a.re.raw) * b.im.raw) << (m - pf));
  return FxComplex{FxReal{detail::renormalize(re, m, out), out},
                   FxReal{detail::renormalize(im, m, out), out}};
}

// n > 0 shifts left (overflow policy applies); n < 0 is an arithmetic right
// shift, i.e. exact division by 2^-n truncated toward negative infinity.
inline FxReal fx_shift(const FxReal& a, int n) {
  if (n >= 0) return FxReal{detail::apply_overflow(i128(a.raw) << n, a.fmt), a.fmt};
  return FxReal{a.raw >> (-n), a.fmt};
}

inline FxComplex fx_cshift(const FxComplex& a, int n) {
  return FxComplex{fx_shift(a.re, n), fx_shift(a.im, n)};
}

inline FxComplex fx_conj(const FxComplex& a) {
  FxComplex r = a;
  r.im.raw = detail::apply_overflow(-i128(a.im.raw), a.im.fmt);
  return r;
}

inline FxComplex fx_czero(const FxFormat& fmt) {
  return FxComplex{FxReal{0, fmt}, FxReal{0, fmt}};
}

inline FxComplex quantize_c(double re, double im, const FxFormat& fmt) {
  return FxComplex{quantize(re, fmt), quantize(im, fmt)};
}

}  // namespace jass::fxp
