#include "jass/kernels.hpp"

#include <bit>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace jass::kernels {

namespace {

inline std::uint64_t abs_raw(std::int64_t r) {
  return r < 0 ? ~static_cast<std::uint64_t>(r) + 1 : static_cast<std::uint64_t>(r);
}

}  // namespace

int pseudonorm_exponent(std::span<const FxComplex> v) {
  std::uint64_t acc = 0;
  int frac = 0;
  for (const FxComplex& c : v) {
    acc |= abs_raw(c.re.raw) | abs_raw(c.im.raw);
    frac = c.re.fmt.frac_bits;
  }
  if (acc == 0) throw std::domain_error("pseudonorm_exponent: all-zero vector");
  // OR of magnitudes has the same leading-one position as their maximum.
  const int msb = 63 - std::countl_zero(acc);
  return msb - frac;
}

FxComplex pseudonorm_apply(const FxComplex& x, int n, const FxFormat& out_fmt) {
  FxFormat f = out_fmt;
  f.rounding = fxp::Rounding::truncate;  // the hardware block is a bare shifter
  const int src_frac = x.re.fmt.frac_bits + n;
  return FxComplex{
      FxReal{fxp::detail::renormalize(x.re.raw, src_frac, f), out_fmt},
      FxReal{fxp::detail::renormalize(x.im.raw, src_frac, f), out_fmt}};
}

InvSqrtUnit::InvSqrtUnit(FxFormat entry_fmt, FxFormat work_fmt, FxFormat out_fmt)
    : entry_fmt_(entry_fmt), work_fmt_(work_fmt), out_fmt_(out_fmt) {
  for (int i = 0; i < kEntries; ++i) {
    entries_[i] = fxp::quantize(1.0 / std::sqrt(bin_midpoint(i)), entry_fmt_).raw;
  }
}

int InvSqrtUnit::address(std::int64_t xprime_raw) {
  // xprime_raw in [2^22, 2^24) at XPRIME_FRAC = 24 fractional bits.
  if (xprime_raw >= (std::int64_t(1) << 23)) {
    return 32 + int((xprime_raw >> 18) & 31);
  }
  return int((xprime_raw >> 17) & 31);
}

double InvSqrtUnit::bin_midpoint(int index) {
  if (index < 32) return 0.25 + (index + 0.5) / 128.0;
  return 0.5 + (index - 32 + 0.5) / 64.0;
}

InvSqrtDecomp InvSqrtUnit::decompose(const FxReal& x) const {
  if (x.raw <= 0) throw std::domain_error("inv_sqrt: input must be positive");
  const int msb = 63 - std::countl_zero(static_cast<std::uint64_t>(x.raw));
  const int alpha = ((msb - x.fmt.frac_bits) >> 1) + 1;  // floor division
  FxFormat xp{XPRIME_FRAC + 2, XPRIME_FRAC, fxp::Overflow::saturate,
              fxp::Rounding::truncate};
  const std::int64_t raw =
      fxp::detail::renormalize(x.raw, x.fmt.frac_bits + 2 * alpha, xp);
  return InvSqrtDecomp{alpha, raw};
}

FxReal InvSqrtUnit::operator()(const FxReal& x) const {
  const InvSqrtDecomp d = decompose(x);
  const FxFormat xp{XPRIME_FRAC + 2, XPRIME_FRAC, fxp::Overflow::saturate,
                    fxp::Rounding::truncate};
  const FxReal xprime{d.xprime_raw, xp};
  const FxReal y0{entries_[address(d.xprime_raw)], entry_fmt_};
  const FxReal t = fxp::fx_mul(fxp::fx_mul(y0, y0, work_fmt_), xprime, work_fmt_);
  const FxReal r = fxp::fx_sub(fxp::quantize(3.0, work_fmt_), t, work_fmt_);
  const FxReal y = fxp::fx_mul(y0, r, work_fmt_);
  // Merge the /2 of the Newton step with the 2^-alpha rescale into one
  // truncating shift (a cascaded shifter would lose low bits twice).
  FxFormat of = out_fmt_;
  of.rounding = fxp::Rounding::truncate;
  return FxReal{
      fxp::detail::renormalize(y.raw, y.fmt.frac_bits + 1 + d.alpha, of),
      out_fmt_};
}

void InvSqrtUnit::write_csv(std::ostream& os) const {
  os << "index,mantissa\n";
  for (int i = 0; i < kEntries; ++i) os << i << ',' << entries_[i] << '\n';
}

namespace {

template <typename T, typename Add>
T tree_fold(std::span<const T> v, Add add) {
  assert(v.size() == 16);
  std::array<T, 16> buf{};
  for (size_t i = 0; i < 16; ++i) buf[i] = v[i];
  for (size_t width = 16; width > 1; width /= 2) {
    for (size_t i = 0; i < width / 2; ++i) buf[i] = add(buf[2 * i], buf[2 * i + 1]);
  }
  return buf[0];
}

}  // namespace

FxReal tree_reduce(std::span<const FxReal> v, const FxFormat& out_fmt) {
  return tree_fold(v, [&](const FxReal& a, const FxReal& b) {
    return fxp::fx_add(a, b, out_fmt);
  });
}

FxComplex tree_creduce(std::span<const FxComplex> v, const FxFormat& out_fmt) {
  return tree_fold(v, [&](const FxComplex& a, const FxComplex& b) {
    return FxComplex{fxp::fx_add(a.re, b.re, out_fmt),
                     fxp::fx_add(a.im, b.im, out_fmt)};
  });
}

double tree_reduce(std::span<const double> v) {
  return tree_fold(v, [](double a, double b) { return a + b; });
}

std::complex<double> tree_creduce(std::span<const std::complex<double>> v) {
  return tree_fold(v, [](std::complex<double> a, std::complex<double> b) {
    return a + b;
  });
}

}  // namespace jass::kernels
