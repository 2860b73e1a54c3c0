// Streaming delay-index synchronization detector over a 16-antenna window:
// Gram updates, spectral jammer-subspace estimation by deflated power
// iterations, and the division-free projected score test N - D*tau >= 0.
// Two datapaths share one structure: a double-precision reference and a
// bit-accurate fixed-point model of the hardware PE array.
#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jass/airlink.hpp"
#include "jass/fxp.hpp"
#include "jass/kernels.hpp"

namespace jass::detector {

using cplx = std::complex<double>;
using Vec16 = std::array<cplx, 16>;
using FxVec16 = std::array<fxp::FxComplex, 16>;

inline constexpr int kB = 16;  // receive antennas
inline constexpr int kK = 16;  // sync sequence length; ||s|^2 = 16 = 1 << 4

// Every width in the fixed datapath, in one reconfigurable table.
struct DatapathWidths {
  fxp::FxFormat input{14, 10};          // receive samples, [-8, 8)
  fxp::FxFormat acc{34, 20};            // Gram/score accumulators, [-8192, 8192)
  fxp::FxFormat norm{21, 19};           // normalized vectors, [-2, 2)
  fxp::FxFormat invsqrt_entry{24, 20};  // LUT entries, values in (1, 2]
  fxp::FxFormat invsqrt_work{30, 24};   // Newton-step intermediates
  fxp::FxFormat invsqrt_out{24, 20};    // 1/sqrt results
  fxp::FxFormat tau{34, 20};            // quantized threshold
};

struct DetectorConfig {
  int i_max = 2;  // jammer subspace dimension estimated
  int t_max = 2;  // power iterations per subspace column
  double tau = 8.0;
  int ell_max = -1;  // -1: scan through length - K - 1
  int ring_capacity = 1024;
  kernels::XorshiftPair prng_seed{0x2545F491u, 0x8D2A5E93u};
  DatapathWidths widths{};
  bool unmitigated = false;        // force A = 0 (no mitigation baseline)
  bool stop_at_declaration = true; // false: keep scanning, record full trace
};

// Hermitian 16x16 held as the lower triangle; the mirror is implied, so the
// matrix stays exactly Hermitian through every slide and deflation.
namespace hm {
inline constexpr std::size_t size = std::size_t(kB) * (kB + 1) / 2;
inline constexpr std::size_t idx(int i, int j) {  // pre: j <= i
  return std::size_t(i) * (i + 1) / 2 + std::size_t(j);
}
}  // namespace hm

struct HermMatF {
  std::array<cplx, hm::size> t{};
  cplx at(int i, int j) const {
    return j <= i ? t[hm::idx(i, j)] : std::conj(t[hm::idx(j, i)]);
  }
};

struct HermMatX {
  std::array<fxp::FxComplex, hm::size> t{};
  fxp::FxComplex at(int i, int j) const {
    return j <= i ? t[hm::idx(i, j)] : fxp::fx_conj(t[hm::idx(j, i)]);
  }
};

// Gram of one K-sample window, accumulated one rank-one term per sample.
HermMatF phi_init(std::span<const airlink::CVec> window);
HermMatX phi_init(std::span<const FxVec16> window, const DatapathWidths& w);

// One-sample slide: downdate the outgoing sample, then update the incoming.
void phi_slide(HermMatF& phi, const airlink::CVec& y_out, const airlink::CVec& y_in);
void phi_slide(HermMatX& phi, const FxVec16& y_out, const FxVec16& y_in,
               const DatapathWidths& w);

// c = sum_m y[m] * s[m], a sign-adjusted accumulation (s is +-1).
Vec16 correlate(std::span<const airlink::CVec> window, const airlink::SyncSequence& seq);
FxVec16 correlate(std::span<const FxVec16> window, const airlink::SyncSequence& seq,
                  const DatapathWidths& w);

// Lambda = ||s||^2 * Phi - c c^H; the scale is an exact left shift by 4.
HermMatF lambda_build(const HermMatF& phi, const Vec16& c);
HermMatX lambda_build(const HermMatX& phi, const FxVec16& c, const DatapathWidths& w);

// Up to two unit-norm jammer-subspace columns. a_raw keeps the final
// pre-normalization iterate (the deflation weight). Inactive columns (all
// but degenerate on real noise) contribute zero everywhere downstream.
struct SubspaceF {
  std::array<Vec16, 2> a{};
  std::array<Vec16, 2> a_raw{};
  std::array<bool, 2> active{false, false};
  cplx b_tilde{0.0, 0.0};  // a1^H a2
};

struct SubspaceX {
  std::array<FxVec16, 2> a{};
  std::array<FxVec16, 2> a_raw{};
  std::array<bool, 2> active{false, false};
  fxp::FxComplex b_tilde{};
};

// Deflated power iterations on Lambda (consumed in place). Advances the
// PRNG pair by i_max draws of 16 complex entries.
SubspaceF power_subspace(HermMatF lambda, kernels::XorshiftPair& prng,
                         const DetectorConfig& cfg);
SubspaceX power_subspace(HermMatX lambda, kernels::XorshiftPair& prng,
                         const DetectorConfig& cfg, const kernels::InvSqrtUnit& isq);

// Numerator and denominator of the division-free score test, plus the raw
// ingredients handy for diagnostics.
struct TermsF {
  double n = 0.0, d = 0.0;
  double c_sq = 0.0, tr_phi = 0.0;
  std::array<cplx, 2> v{};
};

struct TermsX {
  fxp::FxReal n{}, d{};
};

TermsF score_terms(const HermMatF& phi, const Vec16& c, const SubspaceF& sub);
TermsX score_terms(const HermMatX& phi, const FxVec16& c, const SubspaceX& sub,
                   const DatapathWidths& w);

// N - D*tau >= 0, acceptance at equality. The fixed test is one exact
// widened multiply-subtract (only the sign leaves the unit).
bool decide(double n, double d, double tau);
bool decide(const TermsX& t, const fxp::FxReal& tau_q);

struct TraceRow {
  int ell = 0;
  double n = 0.0, d = 0.0, score = 0.0;
  bool declared = false;
  std::int64_t n_raw = 0, d_raw = 0;  // fixed backend only
};

struct Decision {
  std::optional<int> declared;
  std::vector<TraceRow> trace;
};

Decision run(const DetectorConfig& cfg, std::span<const airlink::CVec> stream,
             const airlink::SyncSequence& seq);
Decision run(const DetectorConfig& cfg, const airlink::FxStream& stream,
             const airlink::SyncSequence& seq);

// Re-derives the first-acceptance decision for a new threshold from a full
// (stop_at_declaration = false) trace, exactly as the native backend would.
std::optional<int> declare_from_trace(const std::vector<TraceRow>& trace, double tau,
                                      const DetectorConfig& cfg, bool fixed_backend);

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace);

// Per-delay-index cycle schedule of the PE array. The matvec / rank-one /
// inner-product costs are hardware-documented anchors; pseudonormalization,
// inv_sqrt and the scalar score path overlap with neighboring matrix ops and
// carry no marginal cycles. The table is bookkeeping only.
inline constexpr int kMatvecCycles = 19;
inline constexpr int kRankOneCycles = 19;
inline constexpr int kInnerProductCycles = 5;
inline constexpr int kCyclesPerIndex = 268;

struct CycleEntry {
  std::string op;
  int count = 0;
  int cycles_each = 0;
};

struct CycleModel {
  std::vector<CycleEntry> entries;
  static CycleModel asic_default();
  int total() const;
};

}  // namespace jass::detector
