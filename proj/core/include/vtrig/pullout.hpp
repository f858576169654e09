#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vtrig/align.hpp"
#include "vtrig/trace.hpp"

namespace vtrig {

// Representative CP segment learned from a profiling device; the pattern
// cross-correlated against victim traces.
struct SegmentTemplate {
  std::vector<double> samples;
  std::string source_id;
  std::size_t n_averaged = 1;

  std::size_t size() const { return samples.size(); }
};

struct Detection {
  std::size_t offset = 0;  // sample index of the match start
  double score = 0.0;      // normalized correlation, in [-1, 1]
};

// Optional sub-window of the denoised segment to keep as the pattern;
// length 0 means the full segment.
struct CropWindow {
  std::size_t offset = 0;
  std::size_t length = 0;
};

// Runs the denoising pipeline on a jitter-free profiling trace and keeps the
// result (or a crop of it) as the pattern.
SegmentTemplate learn_template(const Trace& profiling_trace, double l_cp_samples,
                               std::size_t n_segments,
                               const AlignmentParams& params,
                               CropWindow crop = {});

// Zero-mean unit-norm correlation of the pattern at every trace offset;
// detections are local maxima at or above `threshold`, thinned to pairwise
// spacing >= min_spacing (greedy by descending score), returned offset-sorted.
std::vector<Detection> find_occurrences(const Trace& trace,
                                        const SegmentTemplate& tmpl,
                                        double threshold,
                                        std::size_t min_spacing);

// Default spacing between detections as a fraction of the pattern width.
inline constexpr double kDefaultMinSpacingFraction = 0.8;
inline constexpr double kDefaultDetectionThreshold = 0.7;

std::size_t default_min_spacing(std::size_t pattern_width);

// One row per detection; rows are mutually aligned by construction since
// every detection locks to the same pattern phase. Throws NoCpsFoundError
// (carrying the best score seen) when nothing clears the threshold.
SegmentMatrix pullout_segments(const Trace& trace, const SegmentTemplate& tmpl,
                               double threshold, std::size_t min_spacing);

// Averages pulled-out rows into one denoised segment. realign_lag > 0 first
// snaps each row to the template with a bounded circular lag search, which
// cleans up the +/-1 sample quantization of detection offsets.
DenoisedSegment average_pullout(const SegmentMatrix& rows,
                                const SegmentTemplate& tmpl,
                                std::size_t realign_lag = 0);

// Normalized correlation score at every valid offset (exposed for tests and
// diagnostics; find_occurrences/pullout_segments build on it).
std::vector<double> ncc_scores(const Trace& trace, const SegmentTemplate& tmpl);

}  // namespace vtrig
