#include "jass/detector.hpp"

#include <cassert>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace jass::detector {

namespace {

using fxp::FxComplex;
using fxp::FxFormat;
using fxp::FxReal;
using fxp::i128;

// Degenerate-input guards. A column whose iterate collapses below the noise
// floor of the datapath carries no direction information; a pair closer to
// collinear than the score arithmetic can resolve keeps only its first column.
constexpr double kVanishSq = 0x1p-19;
constexpr double kCollinearEps = 0x1p-16;

template <typename S>
class Ring {
 public:
  explicit Ring(std::size_t cap) : buf_(cap), cap_(cap) {}
  void push(const S& s) {
    buf_[std::size_t(count_ % std::int64_t(cap_))] = s;
    ++count_;
  }
  const S& at(std::int64_t i) const {
    assert(i >= count_ - std::int64_t(cap_) && i < count_);
    return buf_[std::size_t(i % std::int64_t(cap_))];
  }

 private:
  std::vector<S> buf_;
  std::size_t cap_;
  std::int64_t count_ = 0;
};

// ---- float datapath primitives ----

Vec16 matvec(const HermMatF& m, const Vec16& a) {
  Vec16 out;
  for (int i = 0; i < kB; ++i) {
    cplx acc{0.0, 0.0};
    for (int j = 0; j < kB; ++j) acc += m.at(i, j) * a[j];
    out[i] = acc;
  }
  return out;
}

void rank_one_sub(HermMatF& m, const Vec16& x, const Vec16& y) {  // m -= x y^H
  for (int i = 0; i < kB; ++i)
    for (int j = 0; j <= i; ++j) m.t[hm::idx(i, j)] -= x[i] * std::conj(y[j]);
}

cplx inner(const Vec16& x, const Vec16& y) {  // x^H y, fixed tree order
  std::array<cplx, 16> prod;
  for (int j = 0; j < kB; ++j) prod[j] = std::conj(x[j]) * y[j];
  return kernels::tree_creduce(std::span<const cplx>(prod));
}

// ---- fixed datapath primitives ----

FxVec16 matvec(const HermMatX& m, const FxVec16& a, const FxFormat& acc_fmt) {
  FxVec16 out;
  for (int i = 0; i < kB; ++i) {
    FxComplex acc = fxp::fx_czero(acc_fmt);
    for (int j = 0; j < kB; ++j) acc = fxp::fx_cmac(acc, m.at(i, j), a[j], acc_fmt);
    out[i] = acc;
  }
  return out;
}

void rank_one_sub(HermMatX& m, const FxVec16& x, const FxVec16& y,
                  const FxFormat& acc_fmt) {
  for (int i = 0; i < kB; ++i)
    for (int j = 0; j <= i; ++j) {
      auto& e = m.t[hm::idx(i, j)];
      e = fxp::fx_cmsubc(e, x[i], y[j], acc_fmt);
    }
}

FxComplex inner(const FxVec16& x, const FxVec16& y, const FxFormat& acc_fmt) {
  std::array<FxComplex, 16> prod;
  for (int j = 0; j < kB; ++j)
    prod[j] = fxp::fx_cmulc(y[j], x[j], acc_fmt);
  return kernels::tree_creduce(std::span<const FxComplex>(prod), acc_fmt);
}

bool all_zero(const FxVec16& v) {
  for (const auto& z : v)
    if (z.re.raw != 0 || z.im.raw != 0) return false;
  return true;
}

}  // namespace

// ---- Gram window ----

HermMatF phi_init(std::span<const airlink::CVec> window) {
  assert(window.size() == std::size_t(kK));
  HermMatF phi;
  for (const auto& y : window)
    for (int i = 0; i < kB; ++i)
      for (int j = 0; j <= i; ++j) phi.t[hm::idx(i, j)] += y[i] * std::conj(y[j]);
  return phi;
}

HermMatX phi_init(std::span<const FxVec16> window, const DatapathWidths& w) {
  assert(window.size() == std::size_t(kK));
  HermMatX phi;
  for (auto& e : phi.t) e = fxp::fx_czero(w.acc);
  for (const auto& y : window)
    for (int i = 0; i < kB; ++i)
      for (int j = 0; j <= i; ++j) {
        auto& e = phi.t[hm::idx(i, j)];
        e = fxp::fx_cmacc(e, y[i], y[j], w.acc);
      }
  return phi;
}

void phi_slide(HermMatF& phi, const airlink::CVec& y_out, const airlink::CVec& y_in) {
  for (int i = 0; i < kB; ++i)
    for (int j = 0; j <= i; ++j) {
      auto& e = phi.t[hm::idx(i, j)];
      e -= y_out[i] * std::conj(y_out[j]);
      e += y_in[i] * std::conj(y_in[j]);
    }
}

void phi_slide(HermMatX& phi, const FxVec16& y_out, const FxVec16& y_in,
               const DatapathWidths& w) {
  for (int i = 0; i < kB; ++i)
    for (int j = 0; j <= i; ++j) {
      auto& e = phi.t[hm::idx(i, j)];
      e = fxp::fx_cmsubc(e, y_out[i], y_out[j], w.acc);
      e = fxp::fx_cmacc(e, y_in[i], y_in[j], w.acc);
    }
}

// ---- correlation ----

Vec16 correlate(std::span<const airlink::CVec> window, const airlink::SyncSequence& seq) {
  assert(window.size() == std::size_t(kK));
  Vec16 c{};
  for (int m = 0; m < kK; ++m)
    for (int i = 0; i < kB; ++i) c[i] += window[std::size_t(m)][i] * seq.s[m];
  return c;
}

FxVec16 correlate(std::span<const FxVec16> window, const airlink::SyncSequence& seq,
                  const DatapathWidths& w) {
  assert(window.size() == std::size_t(kK));
  FxVec16 c;
  for (auto& z : c) z = fxp::fx_czero(w.acc);
  // sign-adjusted accumulation: the sequence is +-1, no multiplier needed
  for (int m = 0; m < kK; ++m) {
    const bool plus = seq.s[m] >= 0.0;
    for (int i = 0; i < kB; ++i) {
      const auto& y = window[std::size_t(m)][i];
      c[i].re = plus ? fxp::fx_add(c[i].re, y.re, w.acc) : fxp::fx_sub(c[i].re, y.re, w.acc);
      c[i].im = plus ? fxp::fx_add(c[i].im, y.im, w.acc) : fxp::fx_sub(c[i].im, y.im, w.acc);
    }
  }
  return c;
}

// ---- Lambda = 16 Phi - c c^H ----

HermMatF lambda_build(const HermMatF& phi, const Vec16& c) {
  HermMatF lam;
  for (int i = 0; i < kB; ++i)
    for (int j = 0; j <= i; ++j)
      lam.t[hm::idx(i, j)] = 16.0 * phi.t[hm::idx(i, j)] - c[i] * std::conj(c[j]);
  return lam;
}

HermMatX lambda_build(const HermMatX& phi, const FxVec16& c, const DatapathWidths& w) {
  HermMatX lam;
  for (int i = 0; i < kB; ++i)
    for (int j = 0; j <= i; ++j) {
      const FxComplex p16 = fxp::fx_cshift(phi.t[hm::idx(i, j)], 4);  // exact
      lam.t[hm::idx(i, j)] = fxp::fx_cmsubc(p16, c[i], c[j], w.acc);
    }
  return lam;
}

// ---- deflated power subspace ----

SubspaceF power_subspace(HermMatF lambda, kernels::XorshiftPair& prng,
                         const DetectorConfig& cfg) {
  SubspaceF sub;
  for (int col = 0; col < cfg.i_max && col < 2; ++col) {
    Vec16 a;
    for (int i = 0; i < kB; ++i) {
      auto d = kernels::prng_complex(prng, cfg.widths.norm);
      prng = d.next;
      a[i] = d.f64;
    }
    Vec16 ap{};
    bool live = true;
    for (int t = 0; t < cfg.t_max; ++t) {
      ap = matvec(lambda, a);
      std::array<double, 16> sq;
      for (int i = 0; i < kB; ++i) sq[i] = std::norm(ap[i]);
      const double n2 = kernels::tree_reduce(std::span<const double>(sq));
      if (!(n2 >= kVanishSq)) {
        live = false;
        break;
      }
      const double inv = 1.0 / std::sqrt(n2);
      for (int i = 0; i < kB; ++i) a[i] = ap[i] * inv;
    }
    if (!live) continue;
    sub.a[std::size_t(col)] = a;
    sub.a_raw[std::size_t(col)] = ap;
    sub.active[std::size_t(col)] = true;
    rank_one_sub(lambda, ap, a);
  }
  if (sub.active[0] && sub.active[1]) {
    const cplx bt = inner(sub.a[0], sub.a[1]);
    if (1.0 - std::norm(bt) < kCollinearEps) {
      sub.active[1] = false;
    } else {
      sub.b_tilde = bt;
    }
  }
  return sub;
}

SubspaceX power_subspace(HermMatX lambda, kernels::XorshiftPair& prng,
                         const DetectorConfig& cfg, const kernels::InvSqrtUnit& isq) {
  const auto& w = cfg.widths;
  SubspaceX sub;
  for (auto& v : sub.a)
    for (auto& z : v) z = fxp::fx_czero(w.norm);
  for (auto& v : sub.a_raw)
    for (auto& z : v) z = fxp::fx_czero(w.acc);
  sub.b_tilde = fxp::fx_czero(w.acc);

  for (int col = 0; col < cfg.i_max && col < 2; ++col) {
    FxVec16 a;
    for (int i = 0; i < kB; ++i) {
      auto d = kernels::prng_complex(prng, w.norm);
      prng = d.next;
      a[i] = d.fx;
    }
    FxVec16 ap;
    for (auto& z : ap) z = fxp::fx_czero(w.acc);
    bool live = true;
    for (int t = 0; t < cfg.t_max; ++t) {
      ap = matvec(lambda, a, w.acc);
      if (all_zero(ap)) {
        live = false;
        break;
      }
      const int pn = kernels::pseudonorm_exponent(std::span<const FxComplex>(ap));
      FxVec16 apn;
      for (int i = 0; i < kB; ++i) apn[i] = kernels::pseudonorm_apply(ap[i], pn, w.norm);
      std::array<FxReal, 16> sq;
      for (int i = 0; i < kB; ++i)
        sq[i] = fxp::fx_cmulc(apn[i], apn[i], w.acc).re;
      const FxReal n2 = kernels::tree_reduce(std::span<const FxReal>(sq), w.acc);
      if (n2.raw <= 0) {
        live = false;
        break;
      }
      const FxReal y = isq(n2);
      const FxComplex yc{y, fxp::FxReal{0, y.fmt}};
      for (int i = 0; i < kB; ++i) a[i] = fxp::fx_cmul(apn[i], yc, w.norm);
    }
    if (!live) continue;
    sub.a[std::size_t(col)] = a;
    sub.a_raw[std::size_t(col)] = ap;
    sub.active[std::size_t(col)] = true;
    rank_one_sub(lambda, ap, a, w.acc);
  }
  if (sub.active[0] && sub.active[1]) {
    const FxComplex bt = inner(sub.a[0], sub.a[1], w.acc);
    const FxReal bt2 = fxp::fx_cmulc(bt, bt, w.acc).re;
    const FxReal one = fxp::quantize(1.0, w.acc);
    const FxReal omb2 = fxp::fx_sub(one, bt2, w.acc);
    if (fxp::value(omb2) < kCollinearEps) {
      sub.active[1] = false;
    } else {
      sub.b_tilde = bt;
    }
  }
  return sub;
}

// ---- score terms ----

TermsF score_terms(const HermMatF& phi, const Vec16& c, const SubspaceF& sub) {
  TermsF out;
  std::array<double, 16> tmp;
  for (int i = 0; i < kB; ++i) tmp[std::size_t(i)] = std::norm(c[std::size_t(i)]);
  out.c_sq = kernels::tree_reduce(std::span<const double>(tmp));
  for (int i = 0; i < kB; ++i) tmp[std::size_t(i)] = phi.at(i, i).real();
  out.tr_phi = kernels::tree_reduce(std::span<const double>(tmp));

  const cplx bt = sub.b_tilde;
  const double omb2 = std::max(0.0, 1.0 - std::norm(bt));

  cplx v1{0.0, 0.0}, v2{0.0, 0.0};
  double m11 = 0.0, m22 = 0.0;
  cplx m12{0.0, 0.0};
  if (sub.active[0]) {
    v1 = inner(sub.a[0], c);
    const Vec16 g1 = matvec(phi, sub.a[0]);
    m11 = inner(g1, sub.a[0]).real();
    if (sub.active[1]) m12 = inner(g1, sub.a[1]);
  }
  if (sub.active[1]) {
    v2 = inner(sub.a[1], c);
    const Vec16 g2 = matvec(phi, sub.a[1]);
    m22 = inner(g2, sub.a[1]).real();
  }
  out.v = {v1, v2};

  const double vbv = std::norm(v1) + std::norm(v2) -
                     2.0 * std::real(bt * std::conj(v1) * v2);
  const double mterm = m11 + m22 - 2.0 * std::real(bt * std::conj(m12));
  // Both terms estimate squared norms; rounding may leave a negative sliver
  // when the true value is ~0 (jammer captures everything), which the unit
  // clips so the score stays in [0, 16].
  out.n = std::max(0.0, omb2 * out.c_sq - vbv);
  out.d = std::max(0.0, omb2 * out.tr_phi - mterm);
  return out;
}

TermsX score_terms(const HermMatX& phi, const FxVec16& c, const SubspaceX& sub,
                   const DatapathWidths& w) {
  std::array<FxReal, 16> tmp;
  for (int i = 0; i < kB; ++i)
    tmp[std::size_t(i)] = fxp::fx_cmulc(c[std::size_t(i)], c[std::size_t(i)], w.acc).re;
  const FxReal csq = kernels::tree_reduce(std::span<const FxReal>(tmp), w.acc);
  for (int i = 0; i < kB; ++i) tmp[std::size_t(i)] = phi.at(i, i).re;
  const FxReal trphi = kernels::tree_reduce(std::span<const FxReal>(tmp), w.acc);

  const FxComplex bt = sub.b_tilde;
  const FxReal bt2 = fxp::fx_cmulc(bt, bt, w.acc).re;
  const FxReal one = fxp::quantize(1.0, w.acc);
  FxReal omb2 = fxp::fx_sub(one, bt2, w.acc);
  if (omb2.raw < 0) omb2.raw = 0;  // |b~|^2 may round a hair past one

  const FxComplex zc = fxp::fx_czero(w.acc);
  const FxReal zr{0, w.acc};
  FxComplex v1 = zc, v2 = zc, m12 = zc;
  FxReal m11 = zr, m22 = zr;
  if (sub.active[0]) {
    v1 = inner(sub.a[0], c, w.acc);
    const FxVec16 g1 = matvec(phi, sub.a[0], w.acc);
    m11 = inner(g1, sub.a[0], w.acc).re;
    if (sub.active[1]) m12 = inner(g1, sub.a[1], w.acc);
  }
  if (sub.active[1]) {
    v2 = inner(sub.a[1], c, w.acc);
    const FxVec16 g2 = matvec(phi, sub.a[1], w.acc);
    m22 = inner(g2, sub.a[1], w.acc).re;
  }

  const FxReal v1sq = fxp::fx_cmulc(v1, v1, w.acc).re;
  const FxReal v2sq = fxp::fx_cmulc(v2, v2, w.acc).re;
  const FxComplex vx = fxp::fx_cmul(bt, fxp::fx_cmulc(v2, v1, w.acc), w.acc);
  const FxReal vx2 = fxp::fx_shift(vx.re, 1);
  const FxReal vbv = fxp::fx_sub(fxp::fx_add(v1sq, v2sq, w.acc), vx2, w.acc);

  const FxReal msum = fxp::fx_add(m11, m22, w.acc);
  const FxComplex mx = fxp::fx_cmulc(bt, m12, w.acc);
  const FxReal mx2 = fxp::fx_shift(mx.re, 1);
  const FxReal mterm = fxp::fx_sub(msum, mx2, w.acc);

  TermsX out;
  out.n = fxp::fx_sub(fxp::fx_mul(omb2, csq, w.acc), vbv, w.acc);
  out.d = fxp::fx_sub(fxp::fx_mul(omb2, trphi, w.acc), mterm, w.acc);
  // clip negative rounding slivers; see the float backend
  if (out.n.raw < 0) out.n.raw = 0;
  if (out.d.raw < 0) out.d.raw = 0;
  return out;
}

// ---- decision ----

bool decide(double n, double d, double tau) { return n - d * tau >= 0.0; }

bool decide(const TermsX& t, const fxp::FxReal& tau_q) {
  const i128 lhs = i128(t.n.raw) << tau_q.fmt.frac_bits;
  const i128 rhs = i128(t.d.raw) * i128(tau_q.raw);
  return lhs >= rhs;
}

// ---- streaming drivers ----

namespace {

double row_score(double n, double d) { return d > 0.0 ? n / d : 0.0; }

}  // namespace

Decision run(const DetectorConfig& cfg, std::span<const airlink::CVec> stream,
             const airlink::SyncSequence& seq) {
  const int len = int(stream.size());
  if (len < kK + 1) throw std::invalid_argument("stream shorter than one window plus a slide");
  if (cfg.ring_capacity < kK + 1) throw std::invalid_argument("ring capacity below window size");
  const int last = len - kK - 1;
  const int ell_max = cfg.ell_max < 0 ? last : std::min(cfg.ell_max, last);

  Ring<airlink::CVec> ring(std::size_t(cfg.ring_capacity));
  for (int m = 0; m < kK; ++m) ring.push(stream[std::size_t(m)]);
  std::array<airlink::CVec, kK> win;
  for (int m = 0; m < kK; ++m) win[std::size_t(m)] = ring.at(m);
  HermMatF phi = phi_init(std::span<const airlink::CVec>(win));

  kernels::XorshiftPair prng = cfg.prng_seed;
  Decision dec;
  for (int ell = 0; ell <= ell_max; ++ell) {
    for (int m = 0; m < kK; ++m) win[std::size_t(m)] = ring.at(ell + m);
    const Vec16 c = correlate(std::span<const airlink::CVec>(win), seq);
    SubspaceF sub;
    if (!cfg.unmitigated) {
      const HermMatF lam = lambda_build(phi, c);
      sub = power_subspace(lam, prng, cfg);
    }
    const TermsF terms = score_terms(phi, c, sub);
    const bool accept = terms.d > 0.0 && decide(terms.n, terms.d, cfg.tau);

    TraceRow row;
    row.ell = ell;
    row.n = terms.n;
    row.d = terms.d;
    row.score = row_score(terms.n, terms.d);
    row.declared = accept && !dec.declared.has_value();
    dec.trace.push_back(row);
    if (row.declared) {
      dec.declared = ell;
      if (cfg.stop_at_declaration) break;
    }
    if (ell < ell_max) {
      ring.push(stream[std::size_t(ell + kK)]);
      phi_slide(phi, ring.at(ell), ring.at(ell + kK));
    }
    prng = kernels::reseed_chain(prng);
  }
  return dec;
}

Decision run(const DetectorConfig& cfg, const airlink::FxStream& stream,
             const airlink::SyncSequence& seq) {
  const int len = int(stream.samples.size());
  if (len < kK + 1) throw std::invalid_argument("stream shorter than one window plus a slide");
  if (cfg.ring_capacity < kK + 1) throw std::invalid_argument("ring capacity below window size");
  const int last = len - kK - 1;
  const int ell_max = cfg.ell_max < 0 ? last : std::min(cfg.ell_max, last);
  const auto& w = cfg.widths;
  const kernels::InvSqrtUnit isq(w.invsqrt_entry, w.invsqrt_work, w.invsqrt_out);

  Ring<FxVec16> ring(std::size_t(cfg.ring_capacity));
  for (int m = 0; m < kK; ++m) ring.push(stream.samples[std::size_t(m)]);
  std::array<FxVec16, kK> win;
  for (int m = 0; m < kK; ++m) win[std::size_t(m)] = ring.at(m);
  HermMatX phi = phi_init(std::span<const FxVec16>(win), w);

  const fxp::FxReal tau_q = fxp::quantize(cfg.tau, w.tau);
  kernels::XorshiftPair prng = cfg.prng_seed;
  Decision dec;
  for (int ell = 0; ell <= ell_max; ++ell) {
    for (int m = 0; m < kK; ++m) win[std::size_t(m)] = ring.at(ell + m);
    const FxVec16 c = correlate(std::span<const FxVec16>(win), seq, w);
    SubspaceX sub;
    sub.b_tilde = fxp::fx_czero(w.acc);
    if (!cfg.unmitigated) {
      const HermMatX lam = lambda_build(phi, c, w);
      sub = power_subspace(lam, prng, cfg, isq);
    }
    const TermsX terms = score_terms(phi, c, sub, w);
    const bool accept = terms.d.raw > 0 && decide(terms, tau_q);

    TraceRow row;
    row.ell = ell;
    row.n = fxp::value(terms.n);
    row.d = fxp::value(terms.d);
    row.n_raw = terms.n.raw;
    row.d_raw = terms.d.raw;
    row.score = row_score(row.n, row.d);
    row.declared = accept && !dec.declared.has_value();
    dec.trace.push_back(row);
    if (row.declared) {
      dec.declared = ell;
      if (cfg.stop_at_declaration) break;
    }
    if (ell < ell_max) {
      ring.push(stream.samples[std::size_t(ell + kK)]);
      phi_slide(phi, ring.at(ell), ring.at(ell + kK), w);
    }
    prng = kernels::reseed_chain(prng);
  }
  return dec;
}

std::optional<int> declare_from_trace(const std::vector<TraceRow>& trace, double tau,
                                      const DetectorConfig& cfg, bool fixed_backend) {
  if (fixed_backend) {
    const fxp::FxReal tau_q = fxp::quantize(tau, cfg.widths.tau);
    for (const auto& row : trace) {
      if (row.d_raw <= 0) continue;
      TermsX t;
      t.n = fxp::from_raw(row.n_raw, cfg.widths.acc);
      t.d = fxp::from_raw(row.d_raw, cfg.widths.acc);
      if (decide(t, tau_q)) return row.ell;
    }
  } else {
    for (const auto& row : trace) {
      if (row.d > 0.0 && decide(row.n, row.d, tau)) return row.ell;
    }
  }
  return std::nullopt;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace) {
  os << "ell,N,D,score,declared\n";
  char line[160];
  for (const auto& row : trace) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g,%d\n", row.ell, row.n, row.d,
                  row.score, row.declared ? 1 : 0);
    os << line;
  }
}

// ---- cycle schedule ----

CycleModel CycleModel::asic_default() {
  CycleModel m;
  m.entries = {
      {"correlate", 1, kMatvecCycles},
      {"lambda_build", 1, kRankOneCycles},
      {"power_matvec", 4, kMatvecCycles},
      {"deflation", 2, kRankOneCycles},
      {"gram_downdate", 1, kRankOneCycles},
      {"gram_update", 1, kRankOneCycles},
      {"whitened_matvec", 2, kMatvecCycles},
      {"inner_product", 8, kInnerProductCycles},
      {"pseudonorm", 4, 0},   // overlapped with the following matvec
      {"inv_sqrt", 4, 0},     // overlapped
      {"score_scalar", 1, 0}, // overlapped
  };
  return m;
}

int CycleModel::total() const {
  int sum = 0;
  for (const auto& e : entries) sum += e.count * e.cycles_each;
  return sum;
}

}  // namespace jass::detector
