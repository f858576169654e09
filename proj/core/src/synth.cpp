#include "vtrig/synth.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include <nlohmann/json.hpp>

#include "vtrig/dsp.hpp"
#include "vtrig/errors.hpp"
#include "vtrig/rng.hpp"

namespace vtrig {

namespace {

constexpr std::size_t kRounds = 10;
constexpr std::size_t kMinRoundSpan = 48;  // 16 POIs plus shoulders must fit

// Share of the active region taken by software overhead on each side of the
// ten rounds. Without this aperiodic structure the trace autocorrelates
// almost as strongly at round spacing as at the full CP length, which no
// real capture does: encryption setup and teardown surround the rounds.
constexpr std::size_t kOverheadNum = 3;
constexpr std::size_t kOverheadDen = 20;  // 15% preamble, 15% postamble

double preamble_wave(double t) {
  return 0.75 - 0.45 * t + 0.30 * std::sin(11.0 * t);
}

double postamble_wave(double t) {
  return 0.35 + 0.50 * t + 0.25 * std::sin(7.0 * t + 1.3);
}

// Sample-scale multiplicative ripple over the active region, identical in
// every CP (fixed code path). Smooth bumps alone are far more lowpass than
// an instruction stream; without this the delta sweep has almost no
// high-frequency content to discriminate sub-sample length errors with.
constexpr double kFineTextureAmp = 0.35;

double fine_texture(std::size_t i) {
  std::uint64_t s = 0x9e3779b97f4a7c15ULL ^ (std::uint64_t(i) * 0xd1342543de82ef95ULL);
  return double(splitmix64_next(s) >> 11) * 0x1.0p-52 - 1.0;  // [-1, 1)
}

struct ActiveLayout {
  std::size_t pre = 0;
  std::size_t rounds = 0;  // all ten together
  std::size_t post = 0;
};

ActiveLayout split_active(std::size_t active) {
  ActiveLayout lay;
  lay.pre = active * kOverheadNum / kOverheadDen;
  lay.post = active * kOverheadNum / kOverheadDen;
  lay.rounds = active - lay.pre - lay.post;
  return lay;
}

void validate(const SynthConfig& c) {
  if (c.period_samples <= 0.0) throw ConfigError("synth: period_samples must be > 0");
  if (c.idle_len == 0) throw ConfigError("synth: idle_len must be >= 1");
  if (c.n_cps == 0) throw ConfigError("synth: n_cps must be >= 1");
  if (c.plaintexts.empty()) throw ConfigError("synth: at least one plaintext required");
  if (c.repeats_per_plaintext == 0)
    throw ConfigError("synth: repeats_per_plaintext must be >= 1");
  if (c.n_cps != c.plaintexts.size() * c.repeats_per_plaintext)
    throw ConfigError("synth: n_cps (" + std::to_string(c.n_cps) +
                      ") must equal plaintexts * repeats_per_plaintext (" +
                      std::to_string(c.plaintexts.size() * c.repeats_per_plaintext) + ")");
  if (c.noise_sigma < 0.0) throw ConfigError("synth: noise_sigma must be >= 0");
  if (c.leak_gain <= 0.0) throw ConfigError("synth: leak_gain must be > 0");
  const auto nominal = static_cast<std::size_t>(c.period_samples);
  if (nominal <= c.idle_len)
    throw ConfigError("synth: period_samples must exceed idle_len");
  const auto lay = split_active(nominal - c.idle_len);
  if (lay.rounds / kRounds < kMinRoundSpan)
    throw ConfigError("synth: span per round is " +
                      std::to_string(lay.rounds / kRounds) +
                      " samples, need >= " + std::to_string(kMinRoundSpan) +
                      " to place the 16 leak points");
}

// 16 leak sample offsets spread across the first round, fixed for all CPs.
std::vector<std::size_t> poi_offsets_for(const SynthConfig& c) {
  const std::size_t nominal = static_cast<std::size_t>(c.period_samples);
  const auto lay = split_active(nominal - c.idle_len);
  const std::size_t round_span = lay.rounds / kRounds;
  std::vector<std::size_t> poi(16);
  for (std::size_t j = 0; j < 16; ++j)
    poi[j] = c.idle_len + lay.pre + round_span * (2 * j + 1) / 32;
  return poi;
}

// Noiseless content of one CP at the given integer length.
std::vector<double> render_cp(const SynthConfig& c, const aes::Block& pt,
                              const std::vector<std::size_t>& poi,
                              std::size_t cp_len) {
  const std::size_t rp_len = c.round_profile.size();
  const auto lay = split_active(cp_len - c.idle_len);
  std::vector<double> cp(cp_len, kIdleLevel);

  std::size_t pos = c.idle_len;
  for (std::size_t i = 0; i < lay.pre; ++i)
    cp[pos + i] = preamble_wave((double(i) + 0.5) / double(lay.pre));
  pos += lay.pre;
  for (std::size_t r = 0; r < kRounds; ++r) {
    const std::size_t lo = lay.rounds * r / kRounds;
    const std::size_t hi = lay.rounds * (r + 1) / kRounds;
    for (std::size_t i = 0; i < hi - lo; ++i)
      cp[pos + lo + i] =
          kRoundGains[r] * c.round_profile[i * rp_len / (hi - lo)];
  }
  pos += lay.rounds;
  for (std::size_t i = 0; i < lay.post; ++i)
    cp[pos + i] = postamble_wave((double(i) + 0.5) / double(lay.post));

  for (std::size_t i = c.idle_len; i < cp_len; ++i)
    cp[i] *= 1.0 + kFineTextureAmp * fine_texture(i - c.idle_len);

  for (std::size_t j = 0; j < 16; ++j) {
    const double leak = c.leak_gain * double(sbox_hw_oracle(pt[j], c.key[j]));
    cp[poi[j]] = leak;
    // half-amplitude shoulders keep a one-sample alignment error from
    // erasing the leak entirely
    cp[poi[j] - 1] = 0.5 * leak;
    cp[poi[j] + 1] = 0.5 * leak;
  }
  return cp;
}

}  // namespace

const double kRoundGains[10] = {1.00, 0.82, 0.95, 0.70, 0.88,
                                1.00, 0.75, 0.92, 0.80, 0.65};

int sbox_hw_oracle(std::uint8_t plaintext_byte, std::uint8_t key_byte) {
  return aes::hamming_weight(aes::sbox(plaintext_byte ^ key_byte));
}

std::vector<double> default_round_profile() {
  std::vector<double> p(32);
  for (std::size_t i = 0; i < p.size(); ++i)
    p[i] = std::sin(std::numbers::pi * (double(i) + 0.5) / double(p.size()));
  return p;
}

std::pair<Trace, GroundTruth> generate(const SynthConfig& config) {
  SynthConfig c = config;
  if (c.round_profile.empty()) c.round_profile = default_round_profile();
  validate(c);

  Rng rng(c.seed);
  const auto poi = poi_offsets_for(c);

  GroundTruth truth;
  truth.true_period_samples = c.period_samples;
  truth.key = c.key;
  truth.poi_offsets = poi;
  truth.idle_len = c.idle_len;
  truth.cp_start_indices.reserve(c.n_cps);
  truth.cp_plaintexts.reserve(c.n_cps);

  Trace trace;
  trace.sample_rate_hz = c.sample_rate_hz;
  trace.source_id = "synth(seed=" + std::to_string(c.seed) + ")";
  trace.samples.reserve(dsp::round_index(double(c.n_cps) * c.period_samples) +
                        c.n_cps * c.jitter_max);

  auto emit = [&](double v) {
    trace.samples.push_back(c.noise_sigma > 0.0 ? v + rng.gaussian(0.0, c.noise_sigma)
                                                : v);
  };

  for (std::size_t k = 0; k < c.n_cps; ++k) {
    if (c.jitter_max > 0) {
      const std::size_t jit = rng.uniform_below(c.jitter_max + 1);
      for (std::size_t i = 0; i < jit; ++i) emit(kIdleLevel);
    }

    truth.cp_start_indices.push_back(trace.samples.size());
    const aes::Block& pt = c.plaintexts[k / c.repeats_per_plaintext];
    truth.cp_plaintexts.push_back(pt);

    // nominal integer length of this CP; the fractional period shows up as
    // occasional +/-1 sample differences between consecutive CPs
    const std::size_t cp_len = dsp::round_index(double(k + 1) * c.period_samples) -
                               dsp::round_index(double(k) * c.period_samples);
    for (double v : render_cp(c, pt, poi, cp_len)) emit(v);
  }

  return {std::move(trace), std::move(truth)};
}

std::vector<double> expected_cp_waveform(const SynthConfig& config,
                                         const aes::Block& plaintext) {
  SynthConfig c = config;
  if (c.round_profile.empty()) c.round_profile = default_round_profile();
  validate(c);
  return render_cp(c, plaintext, poi_offsets_for(c),
                   static_cast<std::size_t>(c.period_samples));
}

void save_ground_truth(const GroundTruth& truth,
                       const std::filesystem::path& path) {
  nlohmann::json j;
  j["true_period_samples"] = truth.true_period_samples;
  j["key"] = aes::to_hex(truth.key);
  j["idle_len"] = truth.idle_len;
  j["poi_offsets"] = truth.poi_offsets;
  j["cp_start_indices"] = truth.cp_start_indices;
  std::vector<std::string> pts;
  pts.reserve(truth.cp_plaintexts.size());
  for (const auto& pt : truth.cp_plaintexts) pts.push_back(aes::to_hex(pt));
  j["cp_plaintexts"] = pts;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ground truth: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed ground truth " + path.string() + ": " + e.what());
  }
  GroundTruth truth;
  truth.true_period_samples = j.at("true_period_samples").get<double>();
  truth.key = aes::parse_hex_block(j.at("key").get<std::string>());
  truth.idle_len = j.at("idle_len").get<std::size_t>();
  truth.poi_offsets = j.at("poi_offsets").get<std::vector<std::size_t>>();
  truth.cp_start_indices = j.at("cp_start_indices").get<std::vector<std::size_t>>();
  for (const auto& s : j.at("cp_plaintexts"))
    truth.cp_plaintexts.push_back(aes::parse_hex_block(s.get<std::string>()));
  return truth;
}

}  // namespace vtrig
