#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vtrig/trace.hpp"

namespace vtrig {

enum class CorrelationMode { plain, normalized };

struct AlignmentParams {
  // Fine-alignment search bound in samples; 0 selects the default of 5% of
  // the segment width. Must stay below half the width, otherwise the search
  // can lock onto the wrong AES round.
  std::size_t max_lag = 0;
  // Size of the recognizable low-variance instant between encryptions.
  std::size_t idle_window = 230;
  // plain: raw dot product over the lag window (the corr of the alignment
  // algorithm); normalized: mean-removed, for amplitude-varying captures.
  CorrelationMode correlation_mode = CorrelationMode::plain;
};

// result[j] = src[(j + lag) mod n]: positive lag moves content toward the
// start. Shared by fine alignment and rotation so shift bookkeeping composes.
std::vector<double> circular_shift(std::span<const double> src, long lag);

// Cuts n_segments rows of width floor(l_cp); row k starts at
// start_offset + round(k * l_cp), so a fractional length accumulates into
// the integer cut positions instead of being truncated per segment.
SegmentMatrix segment_trace(const Trace& trace, double l_cp_samples,
                            std::size_t n_segments, std::size_t start_offset = 0);

// Iterative template alignment: the first row seeds the template, each next
// row is circularly shifted by the lag (within +/-max_lag) maximizing its
// correlation with the current template, and the template is re-averaged
// over the rows seen so far. Returns the average of all aligned rows.
// Per-row applied shifts are appended to *shifts_out when provided.
DenoisedSegment fine_align(const SegmentMatrix& segments,
                           const AlignmentParams& params,
                           std::vector<long>* shifts_out = nullptr);

// Rotates the segment so the start of its minimum-variance window (length
// idle_window, computed on the segment concatenated with its own first
// idle_window samples so a boundary-split idle run is still found) lands at
// index 0. Ties resolve to the lowest index; idempotent.
DenoisedSegment rotate_to_idle(const DenoisedSegment& segment,
                               std::size_t idle_window);

// segment_trace -> fine_align -> rotate_to_idle.
DenoisedSegment denoise_pipeline(const Trace& trace, double l_cp_samples,
                                 std::size_t n_segments,
                                 const AlignmentParams& params,
                                 std::size_t start_offset = 0,
                                 std::vector<long>* shifts_out = nullptr);

}  // namespace vtrig
