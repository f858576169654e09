#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "vtrig/trace.hpp"

namespace vtrig {

enum class PeriodStage { approximate, refined };

struct PeriodEstimate {
  double l_cp_samples = 0.0;  // fractional CP length
  PeriodStage stage = PeriodStage::approximate;

  // delta sweep provenance (refined stage only): (delta_samples, l1) pairs;
  // the argmin equals l_cp_samples - approximate length.
  std::vector<std::pair<double, double>> distance_curve;

  // autocorrelation provenance (approximate stage)
  std::vector<std::size_t> peak_spacings;

  // competing local minima whose distance is within 5% of the global
  // minimum, outside its immediate basin; non-empty means the sweep is
  // ambiguous and worth inspecting by hand
  std::vector<double> ambiguous_deltas;
};

// Mean absolute difference between two equal-length segments.
double l1_distance(std::span<const double> seg_a, std::span<const double> seg_b);

// Step one: approximate CP length from the mean spacing of autocorrelation
// peaks. Candidate peaks must reach 50% of the largest non-zero-lag value
// and clear a noise floor of 10% of the zero-lag energy; fewer than two
// surviving peaks raises NoPeriodicityError.
PeriodEstimate estimate_period_autocorr(const Trace& trace,
                                        std::size_t min_period,
                                        std::size_t max_period);

// Step two: sweep delta candidates in [-interval/2, +interval/2], cut the
// trace at fractional length approx+delta, average even- and odd-indexed
// segments separately, and keep the delta minimizing their L1 distance.
// A flat curve (relative spread below 1e-9) raises DeltaNotIdentifiableError.
PeriodEstimate refine_period(const Trace& trace, const PeriodEstimate& approx,
                             double interval_samples, std::size_t n_steps,
                             std::size_t n_segments);

}  // namespace vtrig
