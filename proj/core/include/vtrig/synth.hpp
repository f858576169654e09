#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "vtrig/aes.hpp"
#include "vtrig/trace.hpp"

namespace vtrig {

// Ground-truth synthetic CP-series generator. Each CP is an idle gap
// followed by ten round bumps; sixteen samples inside the first round leak
// the Hamming weight of SBox(plaintext ^ key), byte-wise. The true period is
// fractional, so sub-sample length precision is observable as accumulated
// drift of the integer CP start positions.
struct SynthConfig {
  double period_samples = 4350.09;  // ground-truth L_cp, fractional
  std::size_t idle_len = 230;       // near-constant gap between encryptions
  std::size_t n_cps = 0;            // total CPs; plaintexts.size() * repeats
  double noise_sigma = 0.0;         // i.i.d. Gaussian, every sample
  std::size_t jitter_max = 0;       // extra idle samples per CP, uniform
  aes::Block key{};
  std::vector<aes::Block> plaintexts;     // one per denoised-segment group
  std::size_t repeats_per_plaintext = 1;  // consecutive CPs per plaintext
  double leak_gain = 0.25;
  std::vector<double> round_profile;  // one round's waveform, stretched to fit
  std::uint64_t seed = 0;
  double sample_rate_hz = 5e6;
};

// Oracle manifest emitted next to every synthetic trace.
struct GroundTruth {
  std::vector<std::size_t> cp_start_indices;  // strictly increasing
  double true_period_samples = 0.0;
  aes::Block key{};
  std::vector<aes::Block> cp_plaintexts;  // one per CP
  std::vector<std::size_t> poi_offsets;   // 16 leak positions, CP-relative
  std::size_t idle_len = 0;
};

// Hamming weight of SBox(plaintext_byte ^ key_byte); the leakage label.
int sbox_hw_oracle(std::uint8_t plaintext_byte, std::uint8_t key_byte);

// Half-sine single-round bump, 32 samples, unit peak.
std::vector<double> default_round_profile();

// Constant floor of the idle gap (noise rides on top of this).
inline constexpr double kIdleLevel = 0.1;

// Fixed per-round amplitude modulation. Real traces never repeat ten
// identical bumps, and without this the trace autocorrelates almost as
// strongly at one round spacing as at the full CP length.
extern const double kRoundGains[10];

std::pair<Trace, GroundTruth> generate(const SynthConfig& config);

// Noiseless content of one CP (idle + modulated bumps + this plaintext's
// leak samples) at the nominal integer length. Test oracle for the
// denoising pipeline; the generator itself stretches rounds per CP.
std::vector<double> expected_cp_waveform(const SynthConfig& config,
                                         const aes::Block& plaintext);

// JSON round-trip for the oracle manifest (`<trace>.truth.json`).
void save_ground_truth(const GroundTruth& truth,
                       const std::filesystem::path& path);
GroundTruth load_ground_truth(const std::filesystem::path& path);

}  // namespace vtrig
