#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vtrig {

// Acquisition metadata carried next to a trace file as <file>.meta.json.
struct TraceMeta {
  double sample_rate_hz = 0.0;
  std::optional<double> center_freq_hz;
  std::string notes;
};

// One continuous real-valued sample record. IQ captures are collapsed to
// magnitude at ingestion; every analysis in this toolkit runs on amplitude.
// Immutable by convention once constructed, safe to share across workers.
struct Trace {
  std::vector<double> samples;
  double sample_rate_hz = 0.0;
  std::string source_id;

  std::size_t size() const { return samples.size(); }
};

// N equal-width segments cut from one trace, row-major storage.
class SegmentMatrix {
public:
  SegmentMatrix() = default;
  SegmentMatrix(std::size_t rows, std::size_t width)
      : n_rows_(rows), width_(width), data_(rows * width, 0.0) {}

  std::size_t rows() const { return n_rows_; }
  std::size_t width() const { return width_; }

  std::span<double> row(std::size_t i) {
    return {data_.data() + i * width_, width_};
  }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * width_, width_};
  }

  // Start index of each row in the source trace, strictly increasing.
  std::vector<std::size_t> origin_offsets;

private:
  std::size_t n_rows_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

// One averaged, rotation-normalized CP segment; the unit consumed by
// profiling and attack. rotation_phase records the circular rotation applied
// by the most recent rotation step (0 if none).
struct DenoisedSegment {
  std::vector<double> samples;
  std::size_t n_averaged = 1;
  std::size_t rotation_phase = 0;

  std::size_t size() const { return samples.size(); }
};

// Raw trace file I/O. Files are headerless little-endian IEEE-754:
// .iq32 holds interleaved float32 (I,Q) pairs, .f32 holds float32 reals.

// Reads interleaved IQ pairs and collapses each pair to sqrt(I^2+Q^2).
// Throws FormatError when the byte length is not a multiple of 8 and
// DataError (naming the first bad sample index) on NaN/Inf payload.
Trace load_iq_trace(const std::filesystem::path& path, const TraceMeta& meta);

// Reads float32 samples verbatim (widened to double). Throws FormatError on
// a byte length not divisible by 4 and DataError on an empty or non-finite
// payload.
Trace load_real_trace(const std::filesystem::path& path, const TraceMeta& meta);

// Writes samples as float32; load_real_trace returns them bit-identically
// (values must already be float32-representable for that to hold, which is
// true for anything that came out of a loader).
void save_real_trace(const Trace& trace, const std::filesystem::path& path);

// Sidecar metadata: <tracefile>.meta.json with sample_rate_hz (required),
// center_freq_hz and notes (optional).
std::filesystem::path meta_sidecar_path(const std::filesystem::path& trace_path);
TraceMeta read_meta_sidecar(const std::filesystem::path& trace_path);
void write_meta_sidecar(const std::filesystem::path& trace_path,
                        const TraceMeta& meta);

// Row-major float32 matrix with a {rows, cols} JSON sidecar; the exchange
// format for extracted segment sets (`segments.bin`).
void save_segment_matrix(const SegmentMatrix& m,
                         const std::filesystem::path& path);
SegmentMatrix load_segment_matrix(const std::filesystem::path& path);

}  // namespace vtrig
