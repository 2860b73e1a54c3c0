// Monte Carlo experiment harness: seeded trial generation, sweep of the
// declaration threshold over a grid, SER/false-alarm/miss accounting with
// binomial confidence intervals, CSV emission, and a dependency-free
// self-test of the datapath invariants.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "jass/airlink.hpp"
#include "jass/detector.hpp"

namespace jass::harness {

enum class Backend { float_ref, fixed_pt };

const char* to_string(Backend b);
Backend backend_from_string(const std::string& s);

struct ExperimentConfig {
  std::uint64_t master_seed = 0x4A55001DULL;
  int trials = 2000;
  std::vector<double> tau_grid;  // empty: 1..16
  Backend backend = Backend::float_ref;
  detector::DetectorConfig det{};
  airlink::TrialScenario scenario{};
};

ExperimentConfig default_config();
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::vector<double> default_tau_grid();

// One synthesized burst pushed through the configured backend with a full
// trace (no early stop), so decisions for any threshold can be re-derived.
struct Trial {
  int l_true = 0;
  detector::Decision decision;
};

Trial run_trial(const ExperimentConfig& cfg, int trial_index);

// Ground truth L is drawn uniformly with an 8-sample guard on both ends.
int draw_burst_start(const ExperimentConfig& cfg, int trial_index);

// The seeded inputs of one trial, identical for both backends.
struct TrialInputs {
  int l_true = 0;
  airlink::SyncSequence seq;
  airlink::Stream stream;
};

TrialInputs make_trial_inputs(const ExperimentConfig& cfg, int trial_index);

enum class Outcome : std::uint8_t { success, false_alarm, miss };

Outcome classify(const Trial& t, double tau, const ExperimentConfig& cfg);

struct SweepRow {
  double tau = 0.0;
  double ser = 0.0, fa_rate = 0.0, miss_rate = 0.0, ci95 = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  int trials = 0;
};

SweepResult run_sweep(const ExperimentConfig& cfg);
void emit_csv(std::ostream& os, const SweepResult& r);

// Fast in-library readiness check. Prints one line per invariant; returns
// the number of failures.
int selftest(std::ostream& os);

}  // namespace jass::harness
