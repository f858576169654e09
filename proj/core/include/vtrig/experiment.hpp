#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vtrig/attack.hpp"
#include "vtrig/config.hpp"
#include "vtrig/synth.hpp"

namespace vtrig {

// One stage record of a run manifest (manifest.json).
struct StageRecord {
  std::string name;
  std::string status;  // "ok" or "failed"
  double wall_ms = 0.0;
  std::vector<std::string> warnings;
  std::vector<std::string> artifacts;
};

struct RunManifest {
  std::string tool_version;
  std::uint64_t seed = 0;
  std::string config_hash;  // fnv1a64 of the raw recipe text, hex
  std::string title;
  std::vector<StageRecord> stages;
};

void save_manifest(const RunManifest& m, const std::filesystem::path& path);
RunManifest load_manifest(const std::filesystem::path& path);

// Fills a SynthConfig from recipe keys under `prefix` (e.g. "synth.").
// Plaintexts and a "random" key are drawn from streams derived off `seed`.
SynthConfig synth_config_from(const KeyValueConfig& cfg, const std::string& prefix,
                              std::uint64_t seed);

// One row of a CP-length precision sweep (Fig. 8 analog): the attack-phase
// denoising and PGE evaluation rerun with the length forced to
// base * (1 + offset_pct/100).
struct SweepEntry {
  double offset_pct = 0.0;
  double offset_samples = 0.0;
  AttackReport report;
  double final_mean_pge = 0.0;  // over bytes, at the largest step
  bool success = false;
  long first_success_step = -1;
};

struct ExperimentResult {
  RunManifest manifest;
  // per branch ("vt", "pullout") attack reports, in branch order
  std::vector<std::pair<std::string, AttackReport>> reports;
  std::vector<SweepEntry> sweep;
  double refined_l_cp = 0.0;
  double true_l_cp = 0.0;
};

// Runs synth -> period -> denoise -> profile -> attack (-> sweep) per the
// recipe, writing every artifact plus manifest.json under output_dir.
// Stage failures are recorded in the manifest before the error propagates.
ExperimentResult run_experiment(const KeyValueConfig& recipe,
                                const std::filesystem::path& output_dir,
                                std::uint64_t seed_override = 0,
                                bool has_seed_override = false);

// Duplicate offsets are dropped with a warning; offset 0 is required.
std::vector<SweepEntry> run_precision_sweep(const KeyValueConfig& recipe,
                                            const std::filesystem::path& output_dir,
                                            std::uint64_t seed_override = 0,
                                            bool has_seed_override = false);

// Human-readable summary of a completed (or failed) run directory; returns
// the text it prints so tests can inspect it.
std::string report_run(const std::filesystem::path& run_dir);
std::string report_compare(const std::filesystem::path& run_a,
                           const std::filesystem::path& run_b);

// pge.csv (step,byte,mean_pge) and the gnuplot heat-grid layout: one row per
// key byte sorted best-to-worst at the final step, one column per step.
void write_pge_csv(const AttackReport& report, const std::filesystem::path& path);
void write_pge_grid(const AttackReport& report, const std::filesystem::path& path);

}  // namespace vtrig
