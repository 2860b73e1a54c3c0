#include "jass/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace jass::harness {

namespace {

// Role tags for the counter-hash seeder; distinct from the airlink roles.
constexpr std::uint64_t kRoleTrial = 0x7121;
constexpr std::uint64_t kRoleBurst = 0xB057;
constexpr std::uint64_t kRolePrng = 0x9EED;

constexpr int kEdgeGuard = 8;  // burst start keeps this margin from both ends

}  // namespace

const char* to_string(Backend b) {
  return b == Backend::float_ref ? "float" : "fixed";
}

Backend backend_from_string(const std::string& s) {
  if (s == "float") return Backend::float_ref;
  if (s == "fixed") return Backend::fixed_pt;
  throw std::invalid_argument("unknown backend: " + s);
}

std::vector<double> default_tau_grid() {
  std::vector<double> g;
  for (int t = 1; t <= 16; ++t) g.push_back(double(t));
  return g;
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.tau_grid = default_tau_grid();
  return cfg;
}

ExperimentConfig parse_config(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  ExperimentConfig cfg = default_config();
  cfg.master_seed = j.value("master_seed", cfg.master_seed);
  cfg.trials = j.value("trials", cfg.trials);
  if (j.contains("tau_grid")) cfg.tau_grid = j.at("tau_grid").get<std::vector<double>>();
  if (j.contains("backend")) cfg.backend = backend_from_string(j.at("backend").get<std::string>());
  if (j.contains("detector")) {
    const auto& d = j.at("detector");
    cfg.det.i_max = d.value("i_max", cfg.det.i_max);
    cfg.det.t_max = d.value("t_max", cfg.det.t_max);
    cfg.det.tau = d.value("tau", cfg.det.tau);
    cfg.det.unmitigated = d.value("unmitigated", cfg.det.unmitigated);
  }
  if (j.contains("scenario")) {
    const auto& s = j.at("scenario");
    cfg.scenario.length = s.value("length", cfg.scenario.length);
    cfg.scenario.snr_db = s.value("snr_db", cfg.scenario.snr_db);
  }
  if (j.contains("jammer")) {
    const auto& jm = j.at("jammer");
    auto& spec = cfg.scenario.jammer;
    if (jm.contains("kind"))
      spec.kind = airlink::jammer_kind_from_string(jm.at("kind").get<std::string>());
    spec.antennas = jm.value("antennas", spec.antennas);
    spec.rho_db = jm.value("rho_db", spec.rho_db);
    spec.duty = jm.value("duty", spec.duty);
    spec.switch_prob = jm.value("switch_prob", spec.switch_prob);
    spec.spoof_delay = jm.value("spoof_delay", spec.spoof_delay);
  }
  if (cfg.trials <= 0) throw std::invalid_argument("trials must be positive");
  if (cfg.tau_grid.empty()) throw std::invalid_argument("tau_grid must be nonempty");
  for (std::size_t i = 1; i < cfg.tau_grid.size(); ++i)
    if (!(cfg.tau_grid[i] > cfg.tau_grid[i - 1]))
      throw std::invalid_argument("tau_grid must be strictly increasing");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

int draw_burst_start(const ExperimentConfig& cfg, int trial_index) {
  const int len = cfg.scenario.length;
  const int lo = kEdgeGuard;
  const int hi = len - airlink::kSeqLen - kEdgeGuard;  // inclusive
  if (hi < lo) throw std::invalid_argument("scenario length leaves no room for the burst");
  const std::uint64_t tseed =
      airlink::derive_seed(cfg.master_seed, kRoleTrial, std::uint64_t(trial_index));
  airlink::Rng rng(airlink::derive_seed(tseed, kRoleBurst, 0));
  return lo + int(rng.next_u64() % std::uint64_t(hi - lo + 1));
}

TrialInputs make_trial_inputs(const ExperimentConfig& cfg, int trial_index) {
  const std::uint64_t tseed =
      airlink::derive_seed(cfg.master_seed, kRoleTrial, std::uint64_t(trial_index));
  TrialInputs in;
  in.l_true = draw_burst_start(cfg, trial_index);
  in.seq = airlink::SyncSequence::random(tseed);
  in.stream = airlink::synth_receive(cfg.scenario, in.seq, in.l_true, tseed);
  return in;
}

Trial run_trial(const ExperimentConfig& cfg, int trial_index) {
  const std::uint64_t tseed =
      airlink::derive_seed(cfg.master_seed, kRoleTrial, std::uint64_t(trial_index));
  const auto [l_true, seq, stream] = make_trial_inputs(cfg, trial_index);

  detector::DetectorConfig det = cfg.det;
  det.stop_at_declaration = false;  // full trace, thresholds re-derived later
  const std::uint64_t p = airlink::derive_seed(tseed, kRolePrng, 0);
  det.prng_seed.s1 = std::uint32_t(p) | 1u;
  det.prng_seed.s2 = std::uint32_t(p >> 32) | 1u;

  Trial t;
  t.l_true = l_true;
  if (cfg.backend == Backend::float_ref) {
    t.decision = detector::run(det, std::span<const airlink::CVec>(stream.samples), seq);
  } else {
    const auto cal = airlink::calibrate(cfg.scenario);
    const auto fxs = airlink::quantize_stream(stream.samples, cal.agc_gain, det.widths.input);
    t.decision = detector::run(det, fxs, seq);
  }
  return t;
}

Outcome classify(const Trial& t, double tau, const ExperimentConfig& cfg) {
  const auto declared = detector::declare_from_trace(
      t.decision.trace, tau, cfg.det, cfg.backend == Backend::fixed_pt);
  if (!declared) return Outcome::miss;
  return *declared == t.l_true ? Outcome::success : Outcome::false_alarm;
}

SweepResult run_sweep(const ExperimentConfig& cfg) {
  const auto& grid = cfg.tau_grid;
  std::vector<int> fa(grid.size(), 0), miss(grid.size(), 0);
  for (int i = 0; i < cfg.trials; ++i) {
    const Trial t = run_trial(cfg, i);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      switch (classify(t, grid[g], cfg)) {
        case Outcome::false_alarm: ++fa[g]; break;
        case Outcome::miss: ++miss[g]; break;
        case Outcome::success: break;
      }
    }
  }
  SweepResult r;
  r.trials = cfg.trials;
  const double n = double(cfg.trials);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    SweepRow row;
    row.tau = grid[g];
    row.fa_rate = fa[g] / n;
    row.miss_rate = miss[g] / n;
    row.ser = row.fa_rate + row.miss_rate;
    row.ci95 = 1.96 * std::sqrt(row.ser * (1.0 - row.ser) / n);
    r.rows.push_back(row);
  }
  return r;
}

void emit_csv(std::ostream& os, const SweepResult& r) {
  os << "tau,ser,fa_rate,miss_rate,ci95\n";
  char line[160];
  for (const auto& row : r.rows) {
    std::snprintf(line, sizeof line, "%.6f,%.6f,%.6f,%.6f,%.6f\n", row.tau, row.ser,
                  row.fa_rate, row.miss_rate, row.ci95);
    os << line;
  }
}

// ---- selftest ----

namespace {

struct Checker {
  std::ostream& os;
  int fails = 0;
  void check(bool ok, const char* name) {
    os << (ok ? "[ok]   " : "[FAIL] ") << name << "\n";
    if (!ok) ++fails;
  }
};

}  // namespace

int selftest(std::ostream& os) {
  using namespace jass;
  Checker ck{os};
  const detector::DatapathWidths w{};

  ck.check(kernels::xorshift32_step(1u) == 270369u, "xorshift32 step of 1");

  ck.check(fxp::quantize(1.5, w.input).raw == 1536, "quantize 1.5 into the input format");
  ck.check(fxp::quantize(1.5 / 1024.0, w.input).raw == 2 &&
               fxp::quantize(2.5 / 1024.0, w.input).raw == 2,
           "round-to-nearest-even ties");
  {
    const auto a = fxp::quantize(1.5, w.input);
    const auto b = fxp::quantize(2.5, w.input);
    ck.check(fxp::fx_mul(a, b, w.acc).raw == (int64_t(3.75 * 1024) << 10),
             "exact product of input-format values");
  }

  {
    const kernels::InvSqrtUnit isq(w.invsqrt_entry, w.invsqrt_work, w.invsqrt_out);
    double worst = 0.0;
    for (int i = 0; i <= 400; ++i) {
      const double x = std::exp2(-6.0 + 12.0 * i / 400.0);
      const auto xq = fxp::quantize(x, w.acc);
      if (xq.raw <= 0) continue;
      const double got = fxp::value(isq(xq));
      const double want = 1.0 / std::sqrt(fxp::value(xq));
      worst = std::max(worst, std::abs(got - want) / want);
    }
    ck.check(worst <= 0x1p-12, "inverse square root within 2^-12 relative");
  }

  {
    std::array<fxp::FxComplex, 16> v;
    for (auto& z : v) z = fxp::quantize_c(0.125, 0.0, w.acc);
    v[5] = fxp::quantize_c(-3.0, 0.25, w.acc);
    const int n = kernels::pseudonorm_exponent(std::span<const fxp::FxComplex>(v));
    const auto y = kernels::pseudonorm_apply(v[5], n, w.norm);
    ck.check(n == 1 && fxp::value(y.re) == -1.5, "pseudonorm exponent and shift");
  }

  {
    std::array<fxp::FxReal, 16> ones;
    for (auto& x : ones) x = fxp::quantize(1.0, w.acc);
    const auto s = kernels::tree_reduce(std::span<const fxp::FxReal>(ones), w.acc);
    ck.check(fxp::value(s) == 16.0, "adder tree sums sixteen ones");
  }

  ck.check(detector::CycleModel::asic_default().total() == detector::kCyclesPerIndex,
           "cycle schedule totals 268 per index");

  ck.check(detector::decide(16.0, 1.0, 16.0), "score test accepts at equality");
  {
    detector::TermsX t;
    t.n = fxp::quantize(16.0, w.acc);
    t.d = fxp::quantize(1.0, w.acc);
    ck.check(detector::decide(t, fxp::quantize(16.0, w.tau)),
             "fixed score test accepts at equality");
  }

  // A noise-free, jammer-free burst at L = 7 must be declared at exactly 7
  // with score K = 16 in both backends.
  {
    const auto chan = airlink::draw_channel(0x5E1F7E57ULL, 0);
    const auto seq = airlink::SyncSequence::random(0x5E1F7E58ULL);
    std::vector<airlink::CVec> samples(40);
    for (auto& s : samples) s.fill({0.0, 0.0});
    for (int m = 0; m < 16; ++m)
      for (int i = 0; i < 16; ++i)
        samples[std::size_t(7 + m)][std::size_t(i)] = chan.h[std::size_t(i)] * seq.s[m];

    detector::DetectorConfig det;
    det.tau = 16.0;
    const auto decf = detector::run(det, std::span<const airlink::CVec>(samples), seq);
    bool okf = decf.declared == 7;
    if (okf) {
      const auto& row = decf.trace.back();
      okf = std::abs(row.score - 16.0) < 1e-9;
    }
    ck.check(okf, "noise-free burst declared at its index (float)");

    const auto fxs = airlink::quantize_stream(samples, 0.5, det.widths.input);
    const auto decx = detector::run(det, fxs, seq);
    ck.check(decx.declared == 7, "noise-free burst declared at its index (fixed)");
  }

  // Sliding the Gram window must be bit-identical to recomputing it.
  {
    airlink::Rng rng(0xD1CE5EEDULL);
    std::vector<std::array<fxp::FxComplex, 16>> ys(24);
    for (auto& v : ys)
      for (auto& z : v) {
        const auto g = rng.cgaussian();
        z = fxp::quantize_c(g.real() * 0.5, g.imag() * 0.5, w.input);
      }
    auto win = [&](int at) {
      return std::span<const std::array<fxp::FxComplex, 16>>(ys.data() + at, 16);
    };
    auto phi = detector::phi_init(win(0), w);
    for (int ell = 0; ell < 8; ++ell)
      detector::phi_slide(phi, ys[std::size_t(ell)], ys[std::size_t(ell + 16)], w);
    const auto ref = detector::phi_init(win(8), w);
    bool same = true;
    for (std::size_t i = 0; i < detector::hm::size; ++i)
      same = same && phi.t[i].re.raw == ref.t[i].re.raw && phi.t[i].im.raw == ref.t[i].im.raw;
    ck.check(same, "slide equals recompute bit-for-bit");
  }

  os << (ck.fails == 0 ? "selftest passed\n" : "selftest FAILED\n");
  return ck.fails;
}

}  // namespace jass::harness
