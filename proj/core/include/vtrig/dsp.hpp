#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace vtrig::dsp {

// Fractional-index rounding used for every virtual-trigger cut position.
// Half-way cases round down (100.5 -> 100), which keeps cut positions stable
// when an estimate sits exactly between two samples.
inline std::size_t round_index(double x) {
  return static_cast<std::size_t>(std::ceil(x - 0.5));
}

// Mean-removed autocorrelation r[lag] for lag in [0, max_lag], FFT-based.
std::vector<double> autocorrelation(std::span<const double> x,
                                    std::size_t max_lag);

// Valid-mode cross-correlation: out[o] = sum_i x[o+i] * k[i] for
// o in [0, len(x) - len(k)]. Both routes compute the same values; the
// generic entry point switches to FFT when the direct op count exceeds
// kXcorrFftCutoffOps.
inline constexpr std::size_t kXcorrFftCutoffOps = 1u << 21;

std::vector<double> xcorr_valid_direct(std::span<const double> x,
                                       std::span<const double> k);
std::vector<double> xcorr_valid_fft(std::span<const double> x,
                                    std::span<const double> k);
std::vector<double> xcorr_valid(std::span<const double> x,
                                std::span<const double> k);

// One-pass sliding mean/population-variance for every window start in
// [0, len(x) - window]; running sum and sum-of-squares updates.
struct SlidingStats {
  std::vector<double> mean;
  std::vector<double> var;
};
SlidingStats sliding_mean_var(std::span<const double> x, std::size_t window);

// Local maxima of `scores` at or above `threshold`, thinned so that kept
// peaks are pairwise >= min_spacing apart (greedy, highest score first,
// lower index on ties). Returned indices are ascending.
std::vector<std::size_t> select_peaks(std::span<const double> scores,
                                      double threshold,
                                      std::size_t min_spacing);

}  // namespace vtrig::dsp
