#include "jass/airlink.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace jass::airlink {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t role, std::uint64_t index) {
  return mix64(mix64(master ^ mix64(role)) ^ mix64(index));
}

std::uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return double(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  cached_ = v * m;
  has_cached_ = true;
  return u * m;
}

cplx Rng::cgaussian() {
  const double re = gaussian();
  const double im = gaussian();
  return cplx(re * M_SQRT1_2, im * M_SQRT1_2);
}

const char* to_string(JammerKind k) {
  switch (k) {
    case JammerKind::none: return "none";
    case JammerKind::barrage: return "barrage";
    case JammerKind::delayed_spoofing: return "delayed_spoofing";
    case JammerKind::antenna_switching: return "antenna_switching";
    case JammerKind::erratic: return "erratic";
  }
  return "?";
}

JammerKind jammer_kind_from_string(const std::string& s) {
  if (s == "none") return JammerKind::none;
  if (s == "barrage") return JammerKind::barrage;
  if (s == "delayed_spoofing") return JammerKind::delayed_spoofing;
  if (s == "antenna_switching") return JammerKind::antenna_switching;
  if (s == "erratic") return JammerKind::erratic;
  throw std::invalid_argument("unknown jammer kind: " + s);
}

SyncSequence SyncSequence::random(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x5EC, 0));
  SyncSequence q;
  for (double& x : q.s) x = rng.uniform() < 0.5 ? -1.0 : 1.0;
  return q;
}

SyncSequence SyncSequence::all_plus() {
  SyncSequence q;
  q.s.fill(1.0);
  return q;
}

ChannelRealization draw_channel(std::uint64_t seed, int jammer_antennas) {
  Rng rng(derive_seed(seed, 0xC4A, 0));
  ChannelRealization ch;
  for (cplx& x : ch.h) x = rng.cgaussian();
  ch.j_cols.resize(size_t(jammer_antennas));
  for (auto& col : ch.j_cols)
    for (cplx& x : col) x = rng.cgaussian();
  return ch;
}

Calibration calibrate(const TrialScenario& sc) {
  Calibration cal;
  cal.n0 = std::pow(10.0, -sc.snr_db / 10.0);
  const bool jammed = sc.jammer.kind != JammerKind::none;
  cal.rho_lin = jammed ? std::pow(10.0, sc.jammer.rho_db / 10.0) : 0.0;
  if (jammed) {
    // E||w||^2 = rho_lin over active samples, split per the jammer's habit.
    const int I = sc.jammer.antennas;
    switch (sc.jammer.kind) {
      case JammerKind::antenna_switching:
        cal.w_scale = std::sqrt(cal.rho_lin);  // one antenna at a time
        break;
      default:
        cal.w_scale = std::sqrt(cal.rho_lin / I);
        break;
    }
  }
  // Busiest-segment per-component variance: signal 1/2, jammer rho/2, noise n0/2.
  const double var = (1.0 + cal.rho_lin + cal.n0) / 2.0;
  cal.agc_gain = kAgcSigmaTarget / std::sqrt(var);
  return cal;
}

std::vector<std::vector<cplx>> jammer_waveform(const JammerSpec& spec, int length,
                                               int L, const SyncSequence& seq,
                                               std::uint64_t seed) {
  const int I = spec.kind == JammerKind::none ? 0 : spec.antennas;
  std::vector<std::vector<cplx>> w(size_t(length), std::vector<cplx>(size_t(I), cplx(0, 0)));
  if (I == 0) return w;

  TrialScenario dummy;
  dummy.jammer = spec;
  const Calibration cal = calibrate(dummy);
  Rng rng(derive_seed(seed, 0x1A3, 0));

  switch (spec.kind) {
    case JammerKind::barrage:
      for (auto& wk : w)
        for (cplx& x : wk) x = cal.w_scale * rng.cgaussian();
      break;
    case JammerKind::erratic:
      for (auto& wk : w) {
        const bool active = rng.uniform() < spec.duty;
        for (cplx& x : wk) x = active ? cal.w_scale * rng.cgaussian() : cplx(0, 0);
      }
      break;
    case JammerKind::antenna_switching: {
      int active = int(rng.uniform() * I) % I;
      for (auto& wk : w) {
        if (rng.uniform() < spec.switch_prob && I > 1) {
          int hop = 1 + int(rng.uniform() * (I - 1)) % (I - 1);
          active = (active + hop) % I;
        }
        wk[size_t(active)] = cal.w_scale * rng.cgaussian();
      }
      break;
    }
    case JammerKind::delayed_spoofing: {
      // Replays s[k - spoof_delay] on every antenna; the first replayed
      // symbol is the one the transmitter sent spoof_delay samples earlier.
      const int d = spec.spoof_delay;
      for (int k = 0; k < length; ++k) {
        const int m = k - d - L;  // index into seq (0-based)
        if (m >= 0 && m < kSeqLen)
          for (cplx& x : w[size_t(k)]) x = cal.w_scale * seq.s[size_t(m)];
      }
      break;
    }
    case JammerKind::none:
      break;
  }
  return w;
}

StreamParts synth_receive_parts(const TrialScenario& sc, const SyncSequence& seq,
                                int L, std::uint64_t seed) {
  if (L < 0 || L + kSeqLen > sc.length)
    throw std::invalid_argument("synth_receive: burst does not fit the stream");
  const Calibration cal = calibrate(sc);
  const ChannelRealization ch =
      draw_channel(seed, sc.jammer.kind == JammerKind::none ? 0 : sc.jammer.antennas);
  const auto w = jammer_waveform(sc.jammer, sc.length, L, seq, seed);
  Rng noise_rng(derive_seed(seed, 0x70E, 0));
  const double noise_std = std::sqrt(cal.n0);

  StreamParts parts;
  parts.signal.assign(size_t(sc.length), CVec{});
  parts.jammer.assign(size_t(sc.length), CVec{});
  parts.noise.assign(size_t(sc.length), CVec{});
  for (int k = 0; k < sc.length; ++k) {
    const int m = k - L;
    const double s = (m >= 0 && m < kSeqLen) ? seq.s[size_t(m)] : 0.0;
    for (int b = 0; b < kAntennas; ++b) {
      if (s != 0.0) parts.signal[size_t(k)][size_t(b)] = ch.h[size_t(b)] * s;
      cplx jam(0, 0);
      for (size_t i = 0; i < ch.j_cols.size(); ++i)
        jam += ch.j_cols[i][size_t(b)] * w[size_t(k)][i];
      parts.jammer[size_t(k)][size_t(b)] = jam;
      parts.noise[size_t(k)][size_t(b)] = noise_std * noise_rng.cgaussian();
    }
  }
  return parts;
}

Stream synth_receive(const TrialScenario& sc, const SyncSequence& seq, int L,
                     std::uint64_t seed) {
  const StreamParts parts = synth_receive_parts(sc, seq, L, seed);
  Stream st;
  st.L = L;
  st.samples.assign(size_t(sc.length), CVec{});
  for (size_t k = 0; k < st.samples.size(); ++k)
    for (size_t b = 0; b < kAntennas; ++b)
      st.samples[k][b] = parts.signal[k][b] + parts.jammer[k][b] + parts.noise[k][b];
  return st;
}

FxStream quantize_stream(const std::vector<CVec>& samples, double gain,
                         const fxp::FxFormat& input_fmt) {
  FxStream out;
  out.fmt = input_fmt;
  out.gain = gain;
  out.samples.resize(samples.size());
  for (size_t k = 0; k < samples.size(); ++k)
    for (size_t b = 0; b < kAntennas; ++b)
      out.samples[k][b] = fxp::quantize_c(samples[k][b].real() * gain,
                                          samples[k][b].imag() * gain, input_fmt);
  return out;
}

double agc_gain_from_rms(const std::vector<CVec>& samples) {
  double acc = 0.0;
  size_t n = 0;
  for (const CVec& v : samples)
    for (const cplx& x : v) {
      acc += x.real() * x.real() + x.imag() * x.imag();
      n += 2;
    }
  const double sigma = std::sqrt(acc / double(n ? n : 1));
  return sigma > 0.0 ? kAgcSigmaTarget / sigma : 1.0;
}

namespace {

void put_u32(std::ofstream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

void put_f32(std::ofstream& os, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  put_u32(os, u);
}

float get_f32(std::ifstream& is) {
  const std::uint32_t u = get_u32(is);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

constexpr char kMagic[8] = {'J', 'A', 'S', 'S', 'I', 'Q', '0', '1'};

}  // namespace

void write_iq(const std::string& path, const std::vector<CVec>& samples) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write(kMagic, 8);
  put_u32(os, kAntennas);
  put_u32(os, std::uint32_t(samples.size()));
  for (const CVec& v : samples)
    for (const cplx& x : v) {
      put_f32(os, float(x.real()));
      put_f32(os, float(x.imag()));
    }
  if (!os) throw std::runtime_error("short write: " + path);
}

std::vector<CVec> read_iq(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("not an IQ capture (bad magic): " + path);
  const std::uint32_t antennas = get_u32(is);
  const std::uint32_t count = get_u32(is);
  if (antennas != kAntennas)
    throw std::runtime_error("IQ capture has unsupported antenna count");
  std::vector<CVec> samples(count);
  for (CVec& v : samples)
    for (cplx& x : v) {
      const float re = get_f32(is);
      const float im = get_f32(is);
      x = cplx(re, im);
    }
  if (!is) throw std::runtime_error("truncated IQ capture: " + path);
  return samples;
}

}  // namespace jass::airlink
