#include "vtrig/align.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "vtrig/dsp.hpp"
#include "vtrig/errors.hpp"

namespace vtrig {

namespace {

constexpr double kDefaultMaxLagFraction = 0.05;

// Dot product of src circularly shifted by `lag` against ref, without
// materializing the shifted copy.
double circular_dot(std::span<const double> src, std::span<const double> ref,
                    long lag) {
  const std::size_t n = src.size();
  const std::size_t start = static_cast<std::size_t>(((lag % long(n)) + long(n)) % long(n));
  const std::size_t head = n - start;
  double acc = 0.0;
  const double* s = src.data();
  const double* r = ref.data();
  for (std::size_t j = 0; j < head; ++j) acc += s[start + j] * r[j];
  for (std::size_t j = head; j < n; ++j) acc += s[j - head] * r[j];
  return acc;
}

std::size_t effective_max_lag(const AlignmentParams& params, std::size_t width) {
  std::size_t lag = params.max_lag;
  if (lag == 0)
    lag = std::max<std::size_t>(1, static_cast<std::size_t>(
                                       double(width) * kDefaultMaxLagFraction));
  if (lag >= width / 2)
    throw ContractError("fine_align: max_lag " + std::to_string(lag) +
                        " must be below half the segment width " +
                        std::to_string(width));
  return lag;
}

}  // namespace

std::vector<double> circular_shift(std::span<const double> src, long lag) {
  const std::size_t n = src.size();
  std::vector<double> out(n);
  const std::size_t start = static_cast<std::size_t>(((lag % long(n)) + long(n)) % long(n));
  for (std::size_t j = 0; j < n; ++j)
    out[j] = src[(start + j) % n];
  return out;
}

SegmentMatrix segment_trace(const Trace& trace, double l_cp_samples,
                            std::size_t n_segments, std::size_t start_offset) {
  if (n_segments == 0) throw ContractError("segment_trace: n_segments must be >= 1");
  const auto width = static_cast<std::size_t>(l_cp_samples);
  if (l_cp_samples <= 0.0 || width == 0)
    throw ContractError("segment_trace: l_cp must be >= 1 sample");

  const std::size_t needed =
      start_offset + dsp::round_index(double(n_segments) * l_cp_samples);
  if (needed > trace.size()) {
    std::size_t feasible = 0;
    if (trace.size() > start_offset)
      feasible = static_cast<std::size_t>(
          double(trace.size() - start_offset) / l_cp_samples);
    throw BoundsError("segment_trace: trace has " + std::to_string(trace.size()) +
                      " samples but " + std::to_string(needed) +
                      " are needed; at most " + std::to_string(feasible) +
                      " segments fit at this offset");
  }

  SegmentMatrix m(n_segments, width);
  m.origin_offsets.resize(n_segments);
  for (std::size_t k = 0; k < n_segments; ++k) {
    const std::size_t start =
        start_offset + dsp::round_index(double(k) * l_cp_samples);
    m.origin_offsets[k] = start;
    std::copy_n(trace.samples.data() + start, width, m.row(k).data());
  }
  return m;
}

DenoisedSegment fine_align(const SegmentMatrix& segments,
                           const AlignmentParams& params,
                           std::vector<long>* shifts_out) {
  if (segments.rows() == 0) throw ContractError("fine_align: empty segment matrix");
  const std::size_t n = segments.rows();
  const std::size_t width = segments.width();
  const long max_lag = static_cast<long>(effective_max_lag(params, width));
  const bool normalized = params.correlation_mode == CorrelationMode::normalized;

  std::vector<double> sum(segments.row(0).begin(), segments.row(0).end());
  std::vector<double> tmpl = sum;
  if (shifts_out) shifts_out->push_back(0);

  std::vector<double> row_buf(width), tmpl_buf(width);
  for (std::size_t i = 1; i < n; ++i) {
    std::span<const double> row = segments.row(i);
    std::span<const double> ref = tmpl;
    if (normalized) {
      // means are shift-invariant under circular lags, so removing them once
      // per row is enough to make the objective the Pearson numerator
      const double rm = std::accumulate(row.begin(), row.end(), 0.0) / double(width);
      const double tm = std::accumulate(tmpl.begin(), tmpl.end(), 0.0) / double(width);
      for (std::size_t j = 0; j < width; ++j) {
        row_buf[j] = row[j] - rm;
        tmpl_buf[j] = tmpl[j] - tm;
      }
      row = row_buf;
      ref = tmpl_buf;
    }

    long best_lag = -max_lag;
    double best = circular_dot(row, ref, -max_lag);
    for (long lag = -max_lag + 1; lag <= max_lag; ++lag) {
      const double score = circular_dot(row, ref, lag);
      if (score > best) {
        best = score;
        best_lag = lag;
      }
    }
    if (shifts_out) shifts_out->push_back(best_lag);

    const auto aligned = circular_shift(segments.row(i), best_lag);
    for (std::size_t j = 0; j < width; ++j) sum[j] += aligned[j];
    const double inv = 1.0 / double(i + 1);
    for (std::size_t j = 0; j < width; ++j) tmpl[j] = sum[j] * inv;
  }

  DenoisedSegment out;
  out.samples.resize(width);
  const double inv = 1.0 / double(n);
  for (std::size_t j = 0; j < width; ++j) out.samples[j] = sum[j] * inv;
  out.n_averaged = n;
  out.rotation_phase = 0;
  return out;
}

DenoisedSegment rotate_to_idle(const DenoisedSegment& segment,
                               std::size_t idle_window) {
  const std::size_t n = segment.samples.size();
  if (idle_window == 0 || idle_window >= n)
    throw ContractError("rotate_to_idle: idle_window must be in [1, segment length)");

  // concatenation trick: extend by the first idle_window samples so an idle
  // run split across the segment boundary is reconstituted at the end
  std::vector<double> extended(segment.samples);
  extended.insert(extended.end(), segment.samples.begin(),
                  segment.samples.begin() + long(idle_window));

  const auto stats = dsp::sliding_mean_var(extended, idle_window);
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (stats.var[i] < stats.var[best]) best = i;

  DenoisedSegment out;
  out.samples = circular_shift(segment.samples, long(best));
  out.n_averaged = segment.n_averaged;
  out.rotation_phase = best;
  return out;
}

DenoisedSegment denoise_pipeline(const Trace& trace, double l_cp_samples,
                                 std::size_t n_segments,
                                 const AlignmentParams& params,
                                 std::size_t start_offset,
                                 std::vector<long>* shifts_out) {
  const auto segments = segment_trace(trace, l_cp_samples, n_segments, start_offset);
  const auto averaged = fine_align(segments, params, shifts_out);
  return rotate_to_idle(averaged, params.idle_window);
}

}  // namespace vtrig
