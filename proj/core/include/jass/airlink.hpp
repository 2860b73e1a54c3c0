// Air-link model: y[k] = h*s[k] + J*w[k] + n[k] over a 16-antenna receiver,
// with Rayleigh channels, four jammer behaviors, SNR/rho calibration and a
// deterministic per-seed sample path. Also the raw IQ capture file format.
#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "jass/fxp.hpp"

namespace jass::airlink {

inline constexpr int kAntennas = 16;  // B
inline constexpr int kSeqLen = 16;    // K

using cplx = std::complex<double>;
using CVec = std::array<cplx, kAntennas>;

// splitmix64 core; the per-trial seeding is a counter hash of (master, role,
// index) so trials are independent and order-free.
std::uint64_t mix64(std::uint64_t z);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t role, std::uint64_t index);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next_u64();
  double uniform();   // [0, 1)
  double gaussian();  // N(0, 1), Marsaglia polar
  cplx cgaussian();   // CN(0, 1)

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

enum class JammerKind { none, barrage, delayed_spoofing, antenna_switching, erratic };

const char* to_string(JammerKind k);
JammerKind jammer_kind_from_string(const std::string& s);

struct JammerSpec {
  JammerKind kind = JammerKind::none;
  int antennas = 2;          // I, ignored for kind == none
  double rho_db = 0.0;       // jammer-to-signal ratio, measured over active samples
  double duty = 0.5;         // erratic: per-sample activity probability
  double switch_prob = 0.1;  // antenna_switching: per-sample Markov switch probability
  int spoof_delay = 1;       // delayed_spoofing: replay lag in samples, >= 1
};

struct TrialScenario {
  int length = 48;
  double snr_db = 5.0;
  JammerSpec jammer{};
};

// +-1 BPSK synchronization sequence, programmable and secret to the jammer.
struct SyncSequence {
  std::array<double, kSeqLen> s{};
  static SyncSequence random(std::uint64_t seed);
  static SyncSequence all_plus();
};

struct ChannelRealization {
  CVec h{};                  // desired-transmitter channel, entries CN(0,1)
  std::vector<CVec> j_cols;  // one column per jammer antenna, entries CN(0,1)
};

ChannelRealization draw_channel(std::uint64_t seed, int jammer_antennas);

// Derived powers. SNR = E||h s||^2 / (B * N0) with E||h||^2 = B, so
// n0 = 10^(-snr/10). rho fixes E||w||^2 = rho_lin over active samples.
// agc_gain scales samples into the fixed backend's input format; the score
// test is invariant under that uniform gain.
struct Calibration {
  double n0 = 0.0;
  double rho_lin = 0.0;
  double w_scale = 0.0;   // per-antenna std of active jammer symbols
  double agc_gain = 1.0;
};

inline constexpr double kAgcSigmaTarget = 0.5;  // per real component

Calibration calibrate(const TrialScenario& sc);

// w[k] for every sample (row k, one entry per jammer antenna). Causality:
// the spoofer's w[k] depends only on sync symbols already transmitted.
std::vector<std::vector<cplx>> jammer_waveform(const JammerSpec& spec, int length,
                                               int L, const SyncSequence& seq,
                                               std::uint64_t seed);

struct Stream {
  std::vector<CVec> samples;
  int L = 0;  // ground-truth burst start, known to the harness only
};

struct StreamParts {
  std::vector<CVec> signal, jammer, noise;
};

StreamParts synth_receive_parts(const TrialScenario& sc, const SyncSequence& seq,
                                int L, std::uint64_t seed);
Stream synth_receive(const TrialScenario& sc, const SyncSequence& seq, int L,
                     std::uint64_t seed);

// Fixed-backend view: samples scaled by gain and quantized into fmt.
struct FxStream {
  fxp::FxFormat fmt{};
  double gain = 1.0;
  std::vector<std::array<fxp::FxComplex, kAntennas>> samples;
};

FxStream quantize_stream(const std::vector<CVec>& samples, double gain,
                         const fxp::FxFormat& input_fmt);
// Gain from measured RMS (for imported captures with unknown calibration).
double agc_gain_from_rms(const std::vector<CVec>& samples);

// IQ capture: 8-byte magic "JASSIQ01", u32 LE antenna count, u32 LE sample
// count, then per sample, per antenna: float32 LE re, float32 LE im.
void write_iq(const std::string& path, const std::vector<CVec>& samples);
std::vector<CVec> read_iq(const std::string& path);

}  // namespace jass::airlink
