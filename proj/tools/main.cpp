// Command-line front end: Monte Carlo sweeps, single-capture detection,
// self-test, the cycle schedule and the inverse-sqrt LUT dump.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "jass/airlink.hpp"
#include "jass/detector.hpp"
#include "jass/harness.hpp"

namespace {

jass::airlink::SyncSequence parse_seq(std::string text) {
  using jass::airlink::kSeqLen;
  if (std::ifstream f(text); f) {  // a file holding the symbol list
    std::ostringstream ss;
    ss << f.rdbuf();
    text = ss.str();
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' '))
      text.pop_back();
  }
  jass::airlink::SyncSequence seq;
  std::size_t got = 0;
  if (text.find_first_of("+-") != std::string::npos &&
      text.find_first_not_of("+-") == std::string::npos) {
    for (char ch : text) {
      if (got >= std::size_t(kSeqLen)) throw CLI::ValidationError("--seq", "too many symbols");
      seq.s[got++] = ch == '+' ? 1.0 : -1.0;
    }
  } else {
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (got >= std::size_t(kSeqLen)) throw CLI::ValidationError("--seq", "too many symbols");
      const int v = std::stoi(tok);
      if (v != 1 && v != -1) throw CLI::ValidationError("--seq", "symbols must be +-1");
      seq.s[got++] = double(v);
    }
  }
  if (got != std::size_t(kSeqLen))
    throw CLI::ValidationError("--seq", "expected 16 symbols");
  return seq;
}

std::string format_seq(const jass::airlink::SyncSequence& seq) {
  std::string s;
  for (double v : seq.s) s += v >= 0.0 ? '+' : '-';
  return s;
}

void write_or_print(const std::string& path, const std::string& payload) {
  if (path.empty()) {
    std::cout << payload;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << payload;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace jass;
  CLI::App app{"jammer-resilient multi-antenna sync detector toolkit"};
  app.require_subcommand(1);

  std::uint64_t seed_override = 0;
  bool have_seed = false;
  app.add_option("--seed", seed_override, "override the experiment master seed")
      ->each([&](const std::string&) { have_seed = true; });
  auto load_cfg = [&](const std::string& path) {
    auto cfg = harness::load_config(path);
    if (have_seed) cfg.master_seed = seed_override;
    return cfg;
  };

  auto* sweep = app.add_subcommand("sweep", "Monte Carlo SER sweep over a threshold grid");
  std::string sweep_cfg, sweep_out;
  sweep->add_option("--config", sweep_cfg, "experiment JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", sweep_out, "CSV output path (default stdout)");

  auto* detect = app.add_subcommand("detect", "run detection on an IQ capture");
  std::string iq_path, seq_text, trace_path, backend_name = "float";
  double tau = 8.0, gain = 0.0;
  detect->add_option("--iq", iq_path, "IQ capture file")->required()->check(CLI::ExistingFile);
  detect->add_option("--seq", seq_text, "sync sequence, e.g. +--+... or 1,-1,...")->required();
  detect->add_option("--tau", tau, "declaration threshold");
  detect->add_option("--backend", backend_name, "float | fixed")
      ->check(CLI::IsMember({"float", "fixed"}));
  detect->add_option("--gain", gain, "fixed-backend input gain (default: from RMS)");
  detect->add_option("--trace", trace_path, "write the per-index score trace CSV here");

  auto* synth = app.add_subcommand("synth", "synthesize one trial and write its IQ capture");
  std::string synth_cfg, synth_out;
  int synth_trial = 0;
  synth->add_option("--config", synth_cfg, "experiment JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--trial", synth_trial, "trial index");
  synth->add_option("--out", synth_out, "IQ output path")->required();

  auto* selftest = app.add_subcommand("selftest", "run the built-in invariant checks");
  (void)selftest;

  auto* cycles = app.add_subcommand("cycles", "print the per-index cycle schedule");
  (void)cycles;

  auto* lut = app.add_subcommand("lut", "dump the inverse-sqrt LUT");
  std::string lut_out;
  lut->add_option("--out", lut_out, "CSV output path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sweep) {
      const auto cfg = load_cfg(sweep_cfg);
      const auto result = harness::run_sweep(cfg);
      std::ostringstream ss;
      harness::emit_csv(ss, result);
      write_or_print(sweep_out, ss.str());
    } else if (*detect) {
      const auto samples = airlink::read_iq(iq_path);
      const auto seq = parse_seq(seq_text);
      detector::DetectorConfig det;
      det.tau = tau;
      det.stop_at_declaration = trace_path.empty();
      detector::Decision dec;
      if (backend_name == "float") {
        dec = detector::run(det, std::span<const airlink::CVec>(samples), seq);
      } else {
        const double g = gain > 0.0 ? gain : airlink::agc_gain_from_rms(samples);
        const auto fxs = airlink::quantize_stream(samples, g, det.widths.input);
        dec = detector::run(det, fxs, seq);
      }
      if (!trace_path.empty()) {
        std::ofstream out(trace_path);
        if (!out) throw std::runtime_error("cannot open for writing: " + trace_path);
        detector::write_trace_csv(out, dec.trace);
      }
      if (dec.declared)
        std::cout << "declared " << *dec.declared << "\n";
      else
        std::cout << "MISS\n";
    } else if (*synth) {
      const auto cfg = load_cfg(synth_cfg);
      const auto in = harness::make_trial_inputs(cfg, synth_trial);
      airlink::write_iq(synth_out, in.stream.samples);
      std::cout << "wrote " << synth_out << ": " << in.stream.samples.size()
                << " samples, L=" << in.l_true << ", seq=" << format_seq(in.seq) << "\n";
    } else if (*selftest) {
      return harness::selftest(std::cout) == 0 ? 0 : 1;
    } else if (*cycles) {
      const auto model = detector::CycleModel::asic_default();
      std::printf("%-18s %5s %11s %9s\n", "op", "count", "cycles_each", "subtotal");
      for (const auto& e : model.entries)
        std::printf("%-18s %5d %11d %9d\n", e.op.c_str(), e.count, e.cycles_each,
                    e.count * e.cycles_each);
      std::printf("total cycles per delay index: %d\n", model.total());
    } else if (*lut) {
      const detector::DatapathWidths w{};
      const kernels::InvSqrtUnit isq(w.invsqrt_entry, w.invsqrt_work, w.invsqrt_out);
      std::ostringstream ss;
      isq.write_csv(ss);
      write_or_print(lut_out, ss.str());
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
