#include "vtrig/pullout.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "vtrig/dsp.hpp"
#include "vtrig/errors.hpp"

namespace vtrig {

namespace {

double variance_of(std::span<const double> x) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
  double acc = 0.0;
  for (double v : x) acc += (v - mean) * (v - mean);
  return acc / double(x.size());
}

}  // namespace

std::size_t default_min_spacing(std::size_t pattern_width) {
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(double(pattern_width) * kDefaultMinSpacingFraction));
}

SegmentTemplate learn_template(const Trace& profiling_trace, double l_cp_samples,
                               std::size_t n_segments,
                               const AlignmentParams& params, CropWindow crop) {
  const auto denoised =
      denoise_pipeline(profiling_trace, l_cp_samples, n_segments, params);

  SegmentTemplate tmpl;
  if (crop.length == 0) {
    tmpl.samples = denoised.samples;
  } else {
    if (crop.offset + crop.length > denoised.samples.size())
      throw ContractError("learn_template: crop window [" +
                          std::to_string(crop.offset) + ", " +
                          std::to_string(crop.offset + crop.length) +
                          ") exceeds segment width " +
                          std::to_string(denoised.samples.size()));
    tmpl.samples.assign(denoised.samples.begin() + long(crop.offset),
                        denoised.samples.begin() + long(crop.offset + crop.length));
  }
  if (variance_of(tmpl.samples) <= 0.0)
    throw ContractError("learn_template: learned pattern is constant");
  tmpl.source_id = profiling_trace.source_id;
  tmpl.n_averaged = denoised.n_averaged;
  return tmpl;
}

std::vector<double> ncc_scores(const Trace& trace, const SegmentTemplate& tmpl) {
  const std::size_t w = tmpl.size();
  if (w == 0) throw ContractError("ncc_scores: empty template");
  if (trace.size() < w)
    throw ContractError("ncc_scores: trace shorter than template");

  const double t_mean =
      std::accumulate(tmpl.samples.begin(), tmpl.samples.end(), 0.0) / double(w);
  std::vector<double> t_centered(w);
  double t_ss = 0.0;
  for (std::size_t i = 0; i < w; ++i) {
    t_centered[i] = tmpl.samples[i] - t_mean;
    t_ss += t_centered[i] * t_centered[i];
  }
  if (t_ss <= 0.0) throw ContractError("ncc_scores: constant template");
  const double t_norm = std::sqrt(t_ss);

  // numerator: sum x[o+i] * t_centered[i]; the window-mean term vanishes
  // because t_centered sums to zero
  const auto numer = dsp::xcorr_valid(trace.samples, t_centered);

  const auto stats = dsp::sliding_mean_var(trace.samples, w);
  std::vector<double> scores(numer.size());
  for (std::size_t o = 0; o < numer.size(); ++o) {
    const double ss = stats.var[o] * double(w);
    if (!(ss > 1e-30)) {
      scores[o] = 0.0;  // constant window carries no shape
      continue;
    }
    scores[o] = std::clamp(numer[o] / (std::sqrt(ss) * t_norm), -1.0, 1.0);
  }
  return scores;
}

std::vector<Detection> find_occurrences(const Trace& trace,
                                        const SegmentTemplate& tmpl,
                                        double threshold,
                                        std::size_t min_spacing) {
  if (!(threshold > 0.0) || threshold > 1.0)
    throw ContractError("find_occurrences: threshold must be in (0, 1]");
  if (min_spacing == 0)
    throw ContractError("find_occurrences: min_spacing must be >= 1");

  const auto scores = ncc_scores(trace, tmpl);
  const auto peaks = dsp::select_peaks(scores, threshold, min_spacing);

  std::vector<Detection> detections;
  detections.reserve(peaks.size());
  for (std::size_t p : peaks) detections.push_back({p, scores[p]});
  return detections;
}

SegmentMatrix pullout_segments(const Trace& trace, const SegmentTemplate& tmpl,
                               double threshold, std::size_t min_spacing) {
  if (!(threshold > 0.0) || threshold > 1.0)
    throw ContractError("pullout_segments: threshold must be in (0, 1]");
  if (min_spacing == 0) min_spacing = default_min_spacing(tmpl.size());

  const auto scores = ncc_scores(trace, tmpl);
  const auto peaks = dsp::select_peaks(scores, threshold, min_spacing);
  if (peaks.empty()) {
    const double max_score =
        scores.empty() ? 0.0 : *std::max_element(scores.begin(), scores.end());
    throw NoCpsFoundError("no CPs found: best correlation " +
                              std::to_string(max_score) + " is below threshold " +
                              std::to_string(threshold),
                          max_score);
  }

  const std::size_t w = tmpl.size();
  SegmentMatrix m(peaks.size(), w);
  m.origin_offsets.assign(peaks.begin(), peaks.end());
  for (std::size_t r = 0; r < peaks.size(); ++r)
    std::copy_n(trace.samples.data() + peaks[r], w, m.row(r).data());
  return m;
}

DenoisedSegment average_pullout(const SegmentMatrix& rows,
                                const SegmentTemplate& tmpl,
                                std::size_t realign_lag) {
  if (rows.rows() == 0) throw ContractError("average_pullout: no rows");
  if (rows.width() != tmpl.size())
    throw ContractError("average_pullout: row width differs from template");

  const std::size_t w = rows.width();
  std::vector<double> sum(w, 0.0);
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    if (realign_lag == 0) {
      auto row = rows.row(r);
      for (std::size_t j = 0; j < w; ++j) sum[j] += row[j];
      continue;
    }
    // snap to the template with a small circular lag search
    long best_lag = 0;
    double best = -1e300;
    for (long lag = -long(realign_lag); lag <= long(realign_lag); ++lag) {
      double acc = 0.0;
      for (std::size_t j = 0; j < w; ++j) {
        const std::size_t idx = (std::size_t(lag + long(w)) + j) % w;
        acc += rows.row(r)[idx] * tmpl.samples[j];
      }
      if (acc > best) {
        best = acc;
        best_lag = lag;
      }
    }
    const auto aligned = circular_shift(rows.row(r), best_lag);
    for (std::size_t j = 0; j < w; ++j) sum[j] += aligned[j];
  }

  DenoisedSegment out;
  out.samples.resize(w);
  for (std::size_t j = 0; j < w; ++j) out.samples[j] = sum[j] / double(rows.rows());
  out.n_averaged = rows.rows();
  out.rotation_phase = 0;
  return out;
}

}  // namespace vtrig
