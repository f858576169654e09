#include "vtrig/period.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vtrig/dsp.hpp"
#include "vtrig/errors.hpp"
#include "vtrig/parallel.hpp"

namespace vtrig {

namespace {

// How many periods beyond max_period the autocorrelation scan covers; more
// peaks tighten the mean-spacing estimate.
constexpr std::size_t kMaxPeriodsScanned = 10;

constexpr double kPeakFraction = 0.50;   // of the largest non-zero-lag value
constexpr double kNoiseFloor = 0.10;     // of the zero-lag energy
constexpr double kFlatCurveTol = 1e-9;   // relative spread of a "flat" sweep
constexpr double kAmbiguityBand = 1.05;  // competing minima within 5%
constexpr std::size_t kAmbiguityBasin = 10;  // steps around the global argmin

}  // namespace

double l1_distance(std::span<const double> seg_a, std::span<const double> seg_b) {
  if (seg_a.size() != seg_b.size())
    throw ContractError("l1_distance: segment lengths differ (" +
                        std::to_string(seg_a.size()) + " vs " +
                        std::to_string(seg_b.size()) + ")");
  if (seg_a.empty()) throw ContractError("l1_distance: empty segments");
  double acc = 0.0;
  for (std::size_t i = 0; i < seg_a.size(); ++i)
    acc += std::abs(seg_a[i] - seg_b[i]);
  return acc / double(seg_a.size());
}

PeriodEstimate estimate_period_autocorr(const Trace& trace,
                                        std::size_t min_period,
                                        std::size_t max_period) {
  if (min_period == 0 || min_period >= max_period)
    throw ContractError("estimate_period_autocorr: need 0 < min_period < max_period");
  if (trace.size() < 3 * max_period)
    throw ContractError("estimate_period_autocorr: trace has " +
                        std::to_string(trace.size()) + " samples, need >= 3*max_period = " +
                        std::to_string(3 * max_period));

  // estimates beyond ~2/3 of the trace rest on too little overlap
  const std::size_t max_lag =
      std::min(trace.size() * 2 / 3, max_period * kMaxPeriodsScanned);
  auto r = dsp::autocorrelation(trace.samples, max_lag);

  // overlap-normalize so peak heights are comparable across the lag range
  const double n = double(trace.size());
  for (std::size_t lag = 1; lag <= max_lag; ++lag)
    r[lag] *= n / double(trace.size() - lag);

  double best = 0.0;
  for (std::size_t lag = min_period; lag <= max_lag; ++lag)
    best = std::max(best, r[lag]);
  const double threshold = std::max(kPeakFraction * best, kNoiseFloor * r[0]);

  // select_peaks works on the slice starting at min_period
  std::span<const double> slice(r.data() + min_period, max_lag - min_period + 1);
  auto peaks = dsp::select_peaks(slice, threshold, min_period);
  if (peaks.size() < 2)
    throw NoPeriodicityError(
        "no periodicity detected: fewer than two autocorrelation peaks above "
        "the prominence threshold");

  PeriodEstimate est;
  est.stage = PeriodStage::approximate;
  est.peak_spacings.reserve(peaks.size() - 1);
  for (std::size_t i = 1; i < peaks.size(); ++i)
    est.peak_spacings.push_back(peaks[i] - peaks[i - 1]);

  // a dropped or spurious peak would poison a plain mean, so average only
  // the spacings near the median
  std::vector<std::size_t> sorted = est.peak_spacings;
  std::sort(sorted.begin(), sorted.end());
  const double median = double(sorted[sorted.size() / 2]);
  double total = 0.0;
  std::size_t kept = 0;
  for (std::size_t s : est.peak_spacings) {
    if (double(s) < 0.8 * median || double(s) > 1.2 * median) continue;
    total += double(s);
    ++kept;
  }
  est.l_cp_samples = total / double(kept);
  return est;
}

PeriodEstimate refine_period(const Trace& trace, const PeriodEstimate& approx,
                             double interval_samples, std::size_t n_steps,
                             std::size_t n_segments) {
  if (n_steps < 2) throw ContractError("refine_period: n_steps must be >= 2");
  if (n_segments < 2)
    throw ContractError("refine_period: need at least 2 segments to form groups");
  if (approx.l_cp_samples <= 0.0)
    throw ContractError("refine_period: approximate length must be > 0");
  if (interval_samples <= 0.0)
    throw ContractError("refine_period: interval must be > 0");

  const double l_hat = approx.l_cp_samples;
  const double longest = l_hat + interval_samples / 2.0;
  const std::size_t needed = dsp::round_index(double(n_segments) * longest);
  if (needed > trace.size()) {
    const auto feasible =
        static_cast<std::size_t>(double(trace.size()) / longest);
    throw BoundsError("refine_period: trace too short for " +
                      std::to_string(n_segments) + " segments of length " +
                      std::to_string(longest) + "; at most " +
                      std::to_string(feasible) + " segments fit");
  }

  const double step = interval_samples / double(n_steps);
  const std::size_t n_points = n_steps + 1;  // inclusive sweep endpoints

  std::vector<double> distances(n_points);
  std::vector<double> deltas(n_points);
  for (std::size_t i = 0; i < n_points; ++i)
    deltas[i] = -interval_samples / 2.0 + double(i) * step;

  // candidates are independent; evaluate in parallel, assemble by index
  parallel_for(n_points, [&](std::size_t i) {
    const double l = l_hat + deltas[i];
    const auto width = static_cast<std::size_t>(l);
    std::vector<double> even(width, 0.0), odd(width, 0.0);
    std::size_t n_even = 0, n_odd = 0;
    for (std::size_t k = 0; k < n_segments; ++k) {
      const std::size_t start = dsp::round_index(double(k) * l);
      const double* src = trace.samples.data() + start;
      double* dst = (k % 2 == 0) ? even.data() : odd.data();
      for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
      (k % 2 == 0) ? ++n_even : ++n_odd;
    }
    for (auto& v : even) v /= double(n_even);
    for (auto& v : odd) v /= double(n_odd);
    distances[i] = l1_distance(even, odd);
  });

  const auto [min_it, max_it] = std::minmax_element(distances.begin(), distances.end());
  const double spread = *max_it - *min_it;
  if (spread <= kFlatCurveTol * std::max(*max_it, 1e-300))
    throw DeltaNotIdentifiableError(
        "delta not identifiable: distance curve is flat across the sweep");

  const std::size_t best = static_cast<std::size_t>(min_it - distances.begin());

  PeriodEstimate refined;
  refined.stage = PeriodStage::refined;
  refined.l_cp_samples = l_hat + deltas[best];
  refined.peak_spacings = approx.peak_spacings;
  refined.distance_curve.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i)
    refined.distance_curve.emplace_back(deltas[i], distances[i]);

  // flag competing local minima outside the global basin
  for (std::size_t i = 0; i < n_points; ++i) {
    const std::size_t d = i > best ? i - best : best - i;
    if (d <= kAmbiguityBasin) continue;
    const bool left_ok = i == 0 || distances[i] <= distances[i - 1];
    const bool right_ok = i + 1 == n_points || distances[i] <= distances[i + 1];
    if (left_ok && right_ok && distances[i] <= kAmbiguityBand * distances[best])
      refined.ambiguous_deltas.push_back(deltas[i]);
  }
  return refined;
}

}  // namespace vtrig
