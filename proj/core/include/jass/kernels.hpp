// Datapath support blocks: xorshift32 PRNG cascade, pseudonormalization,
// LUT + one-Newton-step inverse square root, fixed-order adder tree.
#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <span>

#include "jass/fxp.hpp"

namespace jass::kernels {

using fxp::FxComplex;
using fxp::FxFormat;
using fxp::FxReal;

// Marsaglia triple (13, 17, 5). Zero is absorbing; states must be nonzero.
inline std::uint32_t xorshift32_step(std::uint32_t s) {
  s ^= s << 13;
  s ^= s >> 17;
  s ^= s << 5;
  return s;
}

struct XorshiftPair {
  std::uint32_t s1 = 0x1u;
  std::uint32_t s2 = 0x2u;
};

// Top (frac_bits + 1) bits of a 32-bit word as a two's-complement mantissa,
// giving a value in [-1, 1) at frac_bits fractional bits.
inline std::int64_t word_to_fraction(std::uint32_t word, int frac_bits) {
  assert(frac_bits + 1 <= 32);
  return static_cast<std::int32_t>(word) >> (32 - (frac_bits + 1));
}

// One complex draw. Block 1 advances from its own state; block 2 advances
// from block 1's fresh output (cascade). Real part from block 1, imaginary
// from block 2. Both fixed-point and float views of the same mantissas are
// returned so the two backends consume identical directions.
struct CDraw {
  FxComplex fx;
  std::complex<double> f64;
  XorshiftPair next;
};

inline CDraw prng_complex(const XorshiftPair& p, const FxFormat& fmt) {
  assert(p.s1 != 0 && p.s2 != 0);
  XorshiftPair n;
  n.s1 = xorshift32_step(p.s1);
  n.s2 = xorshift32_step(n.s1);
  const std::int64_t re = word_to_fraction(n.s1, fmt.frac_bits);
  const std::int64_t im = word_to_fraction(n.s2, fmt.frac_bits);
  return CDraw{FxComplex{FxReal{re, fmt}, FxReal{im, fmt}},
               {std::ldexp(double(re), -fmt.frac_bits),
                std::ldexp(double(im), -fmt.frac_bits)},
               n};
}

// Index-boundary reseed: block 2's output state feeds block 1's input.
inline XorshiftPair reseed_chain(const XorshiftPair& p) {
  return XorshiftPair{p.s2, p.s2};
}

// n = floor(log2 max_i max(|Re v_i|, |Im v_i|)), computed by OR-combining
// absolute mantissas and locating the leading one. Precondition: some
// component is nonzero (an all-zero vector has no exponent).
int pseudonorm_exponent(std::span<const FxComplex> v);

// Multiplies every component by 2^-n (arithmetic shift, truncation toward
// negative infinity) into out_fmt. With n from pseudonorm_exponent the
// largest |Re|/|Im| lands in [1, 2) and everything fits [-2, 2).
FxComplex pseudonorm_apply(const FxComplex& x, int n, const FxFormat& out_fmt);

// Base-4 leading-one detect: x' = x * 2^-2a in [0.25, 1) at XPRIME_FRAC bits.
inline constexpr int XPRIME_FRAC = 24;
struct InvSqrtDecomp {
  int alpha;
  std::int64_t xprime_raw;
};

// 64-entry lookup plus one Newton iteration y = y0*(3 - y0^2*x')/2, then a
// rescale by 2^-alpha. Relative error stays below 2^-12.
class InvSqrtUnit {
 public:
  static constexpr int kAddrBits = 6;
  static constexpr int kEntries = 1 << kAddrBits;

  InvSqrtUnit(FxFormat entry_fmt, FxFormat work_fmt, FxFormat out_fmt);

  InvSqrtDecomp decompose(const FxReal& x) const;  // pre: x.raw > 0
  FxReal operator()(const FxReal& x) const;        // pre: x.raw > 0

  // Address = [half-octave bit | next 5 mantissa bits]: 32 bins of width
  // 2^-7 on [0.25, 0.5) and 32 bins of width 2^-6 on [0.5, 1).
  static int address(std::int64_t xprime_raw);
  static double bin_midpoint(int index);

  const std::array<std::int64_t, kEntries>& entries() const { return entries_; }
  const FxFormat& entry_fmt() const { return entry_fmt_; }
  const FxFormat& out_fmt() const { return out_fmt_; }
  void write_csv(std::ostream& os) const;  // rows: index,mantissa

 private:
  FxFormat entry_fmt_, work_fmt_, out_fmt_;
  std::array<std::int64_t, kEntries> entries_{};
};

// Balanced pairwise reduction in the fixed order ((0+1)+(2+3))+((4+5)+(6+7))...
// Length must be 16; every node requantizes into out_fmt.
FxReal tree_reduce(std::span<const FxReal> v, const FxFormat& out_fmt);
FxComplex tree_creduce(std::span<const FxComplex> v, const FxFormat& out_fmt);
// Same association order on doubles.
double tree_reduce(std::span<const double> v);
std::complex<double> tree_creduce(std::span<const std::complex<double>> v);

}  // namespace jass::kernels
