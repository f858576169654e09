#include "vtrig/dsp.hpp"

#include <algorithm>
#include <complex>
#include <mutex>
#include <numeric>

#include <fftw3.h>

#include "vtrig/errors.hpp"

namespace vtrig::dsp {

namespace {

// FFTW plan creation is not thread-safe; execution of a created plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n)
      : data(static_cast<double*>(fftw_malloc(sizeof(double) * n))) {}
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  double* data;
};

struct FftwComplexBuffer {
  explicit FftwComplexBuffer(std::size_t n)
      : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {}
  ~FftwComplexBuffer() { fftw_free(data); }
  FftwComplexBuffer(const FftwComplexBuffer&) = delete;
  FftwComplexBuffer& operator=(const FftwComplexBuffer&) = delete;
  fftw_complex* data;
};

struct PlanPair {
  fftw_plan fwd;
  fftw_plan inv;
};

}  // namespace

std::vector<double> autocorrelation(std::span<const double> x,
                                    std::size_t max_lag) {
  const std::size_t n = x.size();
  if (n == 0) throw ContractError("autocorrelation: empty input");
  if (max_lag >= n) max_lag = n - 1;

  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / double(n);

  // Zero-pad so circular correlation has no wrap-around in [0, max_lag].
  const std::size_t fft_n = next_pow2(n + max_lag + 1);
  const std::size_t spec_n = fft_n / 2 + 1;

  FftwBuffer real(fft_n);
  FftwComplexBuffer spec(spec_n);
  std::fill(real.data, real.data + fft_n, 0.0);
  for (std::size_t i = 0; i < n; ++i) real.data[i] = x[i] - mean;

  fftw_plan fwd, inv;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd = fftw_plan_dft_r2c_1d(static_cast<int>(fft_n), real.data, spec.data,
                               FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(static_cast<int>(fft_n), spec.data, real.data,
                               FFTW_ESTIMATE);
  }
  fftw_execute(fwd);
  for (std::size_t i = 0; i < spec_n; ++i) {
    const double re = spec.data[i][0];
    const double im = spec.data[i][1];
    spec.data[i][0] = re * re + im * im;
    spec.data[i][1] = 0.0;
  }
  fftw_execute(inv);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
  }

  std::vector<double> out(max_lag + 1);
  const double scale = 1.0 / double(fft_n);
  for (std::size_t lag = 0; lag <= max_lag; ++lag)
    out[lag] = real.data[lag] * scale;
  return out;
}

std::vector<double> xcorr_valid_direct(std::span<const double> x,
                                       std::span<const double> k) {
  if (k.empty() || x.size() < k.size())
    throw ContractError("xcorr_valid: kernel longer than signal or empty");
  const std::size_t m = k.size();
  const std::size_t n_out = x.size() - m + 1;
  std::vector<double> out(n_out);
  for (std::size_t o = 0; o < n_out; ++o) {
    double acc = 0.0;
    const double* xp = x.data() + o;
    for (std::size_t i = 0; i < m; ++i) acc += xp[i] * k[i];
    out[o] = acc;
  }
  return out;
}

std::vector<double> xcorr_valid_fft(std::span<const double> x,
                                    std::span<const double> k) {
  if (k.empty() || x.size() < k.size())
    throw ContractError("xcorr_valid: kernel longer than signal or empty");
  const std::size_t n = x.size();
  const std::size_t m = k.size();
  const std::size_t n_out = n - m + 1;

  const std::size_t fft_n = next_pow2(n + m);
  const std::size_t spec_n = fft_n / 2 + 1;

  FftwBuffer a(fft_n), b(fft_n);
  FftwComplexBuffer sa(spec_n), sb(spec_n);
  std::fill(a.data, a.data + fft_n, 0.0);
  std::fill(b.data, b.data + fft_n, 0.0);
  std::copy(x.begin(), x.end(), a.data);
  std::copy(k.begin(), k.end(), b.data);

  fftw_plan fa, fb, inv;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fa = fftw_plan_dft_r2c_1d(static_cast<int>(fft_n), a.data, sa.data,
                              FFTW_ESTIMATE);
    fb = fftw_plan_dft_r2c_1d(static_cast<int>(fft_n), b.data, sb.data,
                              FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(static_cast<int>(fft_n), sa.data, a.data,
                               FFTW_ESTIMATE);
  }
  fftw_execute(fa);
  fftw_execute(fb);
  // correlation = ifft(fft(x) * conj(fft(k)))
  for (std::size_t i = 0; i < spec_n; ++i) {
    const std::complex<double> va(sa.data[i][0], sa.data[i][1]);
    const std::complex<double> vb(sb.data[i][0], sb.data[i][1]);
    const std::complex<double> prod = va * std::conj(vb);
    sa.data[i][0] = prod.real();
    sa.data[i][1] = prod.imag();
  }
  fftw_execute(inv);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fa);
    fftw_destroy_plan(fb);
    fftw_destroy_plan(inv);
  }

  std::vector<double> out(n_out);
  const double scale = 1.0 / double(fft_n);
  for (std::size_t o = 0; o < n_out; ++o) out[o] = a.data[o] * scale;
  return out;
}

std::vector<double> xcorr_valid(std::span<const double> x,
                                std::span<const double> k) {
  if (k.empty() || x.size() < k.size())
    throw ContractError("xcorr_valid: kernel longer than signal or empty");
  const std::size_t ops = (x.size() - k.size() + 1) * k.size();
  if (ops > kXcorrFftCutoffOps) return xcorr_valid_fft(x, k);
  return xcorr_valid_direct(x, k);
}

SlidingStats sliding_mean_var(std::span<const double> x, std::size_t window) {
  if (window == 0 || window > x.size())
    throw ContractError("sliding_mean_var: invalid window");
  const std::size_t n_out = x.size() - window + 1;
  SlidingStats stats;
  stats.mean.resize(n_out);
  stats.var.resize(n_out);

  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < window; ++i) {
    s1 += x[i];
    s2 += x[i] * x[i];
  }
  const double inv_w = 1.0 / double(window);
  for (std::size_t o = 0;; ++o) {
    const double mean = s1 * inv_w;
    stats.mean[o] = mean;
    // cancellation can push this a hair below zero for constant runs
    stats.var[o] = std::max(0.0, s2 * inv_w - mean * mean);
    if (o + 1 == n_out) break;
    const double outgoing = x[o];
    const double incoming = x[o + window];
    s1 += incoming - outgoing;
    s2 += incoming * incoming - outgoing * outgoing;
  }
  return stats;
}

std::vector<std::size_t> select_peaks(std::span<const double> scores,
                                      double threshold,
                                      std::size_t min_spacing) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    if (scores[i] < threshold) continue;
    const bool left_ok = i == 0 || scores[i] > scores[i - 1];
    const bool right_ok = i + 1 == n || scores[i] >= scores[i + 1];
    if (left_ok && right_ok) candidates.push_back(i);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (scores[a] != scores[b]) return scores[a] > scores[b];
                     return a < b;
                   });
  std::vector<std::size_t> kept;
  for (std::size_t c : candidates) {
    bool ok = true;
    for (std::size_t k : kept) {
      const std::size_t d = c > k ? c - k : k - c;
      if (d < min_spacing) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace vtrig::dsp
