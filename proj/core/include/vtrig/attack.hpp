#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vtrig/aes.hpp"
#include "vtrig/trace.hpp"

namespace vtrig {

// Per-key-byte Gaussian templates over Hamming-weight classes. One
// independent normal per point of interest (naive Bayes): the simplest
// profiled model that tracks segmentation quality.
struct ByteProfile {
  std::vector<std::size_t> poi_indices;               // n_poi sample indices
  std::array<std::vector<double>, 9> class_mean;      // [hw][poi]
  std::array<std::vector<double>, 9> class_var;       // [hw][poi], floored
  std::array<bool, 9> observed{};                     // class had samples
};

struct Profile {
  std::size_t n_poi = 0;
  std::size_t segment_length = 0;
  std::size_t n_profiling = 0;
  std::array<ByteProfile, 16> bytes;
  // (byte, hw class) pairs whose statistics were interpolated from
  // neighbors because the class never occurred while profiling
  std::vector<std::pair<int, int>> interpolated_classes;
};

// Partial guessing entropy per key byte: pge[step][byte] is the number of
// hypotheses scoring strictly above the true byte, averaged over
// repetitions then rounded; mean_pge keeps the unrounded means.
struct AttackReport {
  std::vector<std::array<int, 16>> pge;
  std::vector<std::array<double, 16>> mean_pge;
  std::vector<std::size_t> traces_used;
  std::size_t n_repetitions = 1;
};

// Labels each segment with sbox_hw_oracle(plaintext_b, key_b), picks the
// n_poi samples with the highest |correlation| to the labels, and records
// per-class mean/variance at those samples. Throws DegenerateProfileError
// when some byte sees fewer than two distinct labels.
Profile build_profile(const std::vector<DenoisedSegment>& segments,
                      const std::vector<aes::Block>& plaintexts,
                      const aes::Block& key, std::size_t n_poi);

// Rank of `true_value`'s score: number of competitors scoring strictly
// higher (optimistic tie rule). Exposed for the null-model sanity check.
int rank_of(std::span<const double> scores, std::uint8_t true_value);

// Scores all 256 hypotheses for every byte by summed per-POI Gaussian
// log-likelihood and reports the PGE of the true key, one step.
AttackReport attack(const Profile& profile,
                    const std::vector<DenoisedSegment>& segments,
                    const std::vector<aes::Block>& plaintexts,
                    const aes::Block& true_key);

// PGE as a function of segment count: per repetition, shuffle the segment
// order (seeded), attack with the first s segments for each step s, and
// average the per-byte PGE over repetitions.
AttackReport pge_curve(const Profile& profile,
                       const std::vector<DenoisedSegment>& segments,
                       const std::vector<aes::Block>& plaintexts,
                       const aes::Block& true_key,
                       std::vector<std::size_t> steps,
                       std::size_t n_repetitions, std::uint64_t seed);

// "No more than one key byte should reach" PGE >= 4.
inline constexpr double kPgeSuccessThreshold = 4.0;
inline constexpr int kMaxBytesAtThreshold = 1;
bool meets_success_criterion(const std::array<double, 16>& pge_row);

// First step index meeting the success criterion, or -1.
long first_success_step(const AttackReport& report);

void save_profile(const Profile& profile, const std::filesystem::path& path);
Profile load_profile(const std::filesystem::path& path);

// Plaintext list files: one 32-char hex block per line.
void save_plaintexts(const std::vector<aes::Block>& pts,
                     const std::filesystem::path& path);
std::vector<aes::Block> load_plaintexts(const std::filesystem::path& path);

}  // namespace vtrig
