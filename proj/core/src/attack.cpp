#include "vtrig/attack.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>

#include <nlohmann/json.hpp>

#include "vtrig/errors.hpp"
#include "vtrig/parallel.hpp"
#include "vtrig/rng.hpp"
#include "vtrig/synth.hpp"

namespace vtrig {

namespace {

constexpr double kVarFloorFraction = 1e-12;  // of the unconditional variance
constexpr double kVarFloorAbs = 1e-30;
constexpr double kVarPriorWeight = 4.0;  // pooled-variance shrinkage strength

void check_segments(const std::vector<DenoisedSegment>& segments,
                    const std::vector<aes::Block>& plaintexts) {
  if (segments.empty()) throw ContractError("attack_eval: zero segments");
  if (segments.size() != plaintexts.size())
    throw ContractError("attack_eval: " + std::to_string(segments.size()) +
                        " segments vs " + std::to_string(plaintexts.size()) +
                        " plaintexts");
  const std::size_t len = segments.front().size();
  for (const auto& s : segments)
    if (s.size() != len)
      throw ContractError("attack_eval: segments have differing lengths");
}

}  // namespace

Profile build_profile(const std::vector<DenoisedSegment>& segments,
                      const std::vector<aes::Block>& plaintexts,
                      const aes::Block& key, std::size_t n_poi) {
  check_segments(segments, plaintexts);
  if (n_poi == 0) throw ContractError("build_profile: n_poi must be >= 1");
  const std::size_t n = segments.size();
  const std::size_t len = segments.front().size();
  if (n_poi > len) throw ContractError("build_profile: n_poi exceeds segment length");

  Profile profile;
  profile.n_poi = n_poi;
  profile.segment_length = len;
  profile.n_profiling = n;

  for (int b = 0; b < 16; ++b) {
    std::vector<int> labels(n);
    for (std::size_t s = 0; s < n; ++s)
      labels[s] = sbox_hw_oracle(plaintexts[s][b], key[b]);

    const int lmin = *std::min_element(labels.begin(), labels.end());
    const int lmax = *std::max_element(labels.begin(), labels.end());
    if (lmin == lmax)
      throw DegenerateProfileError(
          "degenerate profiling set: key byte " + std::to_string(b) +
          " sees a single Hamming-weight class; vary the plaintexts");

    // Pearson correlation of every sample index against the labels
    const double label_mean =
        std::accumulate(labels.begin(), labels.end(), 0.0) / double(n);
    double label_ss = 0.0;
    for (int l : labels) label_ss += (l - label_mean) * (l - label_mean);

    std::vector<double> corr(len, 0.0);
    std::vector<double> sample_mean(len, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
      const auto& row = segments[s].samples;
      for (std::size_t i = 0; i < len; ++i) sample_mean[i] += row[i];
    }
    for (auto& v : sample_mean) v /= double(n);
    std::vector<double> cov(len, 0.0), ss(len, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
      const auto& row = segments[s].samples;
      const double dl = labels[s] - label_mean;
      for (std::size_t i = 0; i < len; ++i) {
        const double dx = row[i] - sample_mean[i];
        cov[i] += dx * dl;
        ss[i] += dx * dx;
      }
    }
    for (std::size_t i = 0; i < len; ++i) {
      const double denom = std::sqrt(ss[i] * label_ss);
      corr[i] = denom > 0.0 ? std::abs(cov[i]) / denom : 0.0;
    }

    std::vector<std::size_t> order(len);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
      if (corr[a] != corr[c]) return corr[a] > corr[c];
      return a < c;
    });

    ByteProfile& bp = profile.bytes[b];
    bp.poi_indices.assign(order.begin(), order.begin() + long(n_poi));
    std::sort(bp.poi_indices.begin(), bp.poi_indices.end());

    // per-class statistics at the selected points
    std::array<std::size_t, 9> counts{};
    for (int h = 0; h < 9; ++h) {
      bp.class_mean[h].assign(n_poi, 0.0);
      bp.class_var[h].assign(n_poi, 0.0);
    }
    for (std::size_t s = 0; s < n; ++s) {
      const int h = labels[s];
      ++counts[h];
      for (std::size_t p = 0; p < n_poi; ++p)
        bp.class_mean[h][p] += segments[s].samples[bp.poi_indices[p]];
    }
    for (int h = 0; h < 9; ++h) {
      bp.observed[h] = counts[h] > 0;
      if (counts[h] > 0)
        for (auto& v : bp.class_mean[h]) v /= double(counts[h]);
    }
    for (std::size_t s = 0; s < n; ++s) {
      const int h = labels[s];
      for (std::size_t p = 0; p < n_poi; ++p) {
        const double d =
            segments[s].samples[bp.poi_indices[p]] - bp.class_mean[h][p];
        bp.class_var[h][p] += d * d;
      }
    }
    for (int h = 0; h < 9; ++h)
      if (counts[h] > 0)
        for (auto& v : bp.class_var[h]) v /= double(counts[h]);

    // A class seen once (or a few times) has a near-zero sample variance,
    // and a near-zero variance turns a single mismatched segment into a
    // catastrophic log-likelihood penalty. Shrink low-count class variances
    // toward the pooled within-class variance; on noiseless data pooled is
    // zero, so the spec floor below still governs.
    for (std::size_t p = 0; p < n_poi; ++p) {
      double pooled_num = 0.0, pooled_den = 0.0;
      for (int h = 0; h < 9; ++h) {
        if (counts[h] >= 2) {
          pooled_num += bp.class_var[h][p] * double(counts[h]);
          pooled_den += double(counts[h]);
        }
      }

      double m = 0.0, v = 0.0;
      for (std::size_t s = 0; s < n; ++s) m += segments[s].samples[bp.poi_indices[p]];
      m /= double(n);
      for (std::size_t s = 0; s < n; ++s) {
        const double d = segments[s].samples[bp.poi_indices[p]] - m;
        v += d * d;
      }
      v /= double(n);

      const double pooled = pooled_den > 0.0 ? pooled_num / pooled_den : v;
      const double floor_v = std::max(kVarFloorAbs, kVarFloorFraction * v);
      for (int h = 0; h < 9; ++h) {
        if (!bp.observed[h]) continue;
        const double nh = double(counts[h]);
        bp.class_var[h][p] = (nh * bp.class_var[h][p] + kVarPriorWeight * pooled) /
                             (nh + kVarPriorWeight);
        bp.class_var[h][p] = std::max(bp.class_var[h][p], floor_v);
      }
    }

    // interpolate classes that never occurred from their nearest observed
    // neighbors (the profiling set may simply not cover HW 0 or 8)
    for (int h = 0; h < 9; ++h) {
      if (bp.observed[h]) continue;
      int lo = -1, hi = -1;
      for (int d = h - 1; d >= 0; --d)
        if (bp.observed[d]) { lo = d; break; }
      for (int d = h + 1; d < 9; ++d)
        if (bp.observed[d]) { hi = d; break; }
      for (std::size_t p = 0; p < n_poi; ++p) {
        if (lo >= 0 && hi >= 0) {
          const double t = double(h - lo) / double(hi - lo);
          bp.class_mean[h][p] =
              (1.0 - t) * bp.class_mean[lo][p] + t * bp.class_mean[hi][p];
          bp.class_var[h][p] =
              (1.0 - t) * bp.class_var[lo][p] + t * bp.class_var[hi][p];
        } else {
          const int src = lo >= 0 ? lo : hi;
          bp.class_mean[h][p] = bp.class_mean[src][p];
          bp.class_var[h][p] = bp.class_var[src][p];
        }
      }
      profile.interpolated_classes.emplace_back(b, h);
    }
  }
  return profile;
}

int rank_of(std::span<const double> scores, std::uint8_t true_value) {
  const double ref = scores[true_value];
  int rank = 0;
  for (std::size_t y = 0; y < scores.size(); ++y)
    if (y != true_value && scores[y] > ref) ++rank;
  return rank;
}

namespace {

std::array<int, 16> attack_ranks(const Profile& profile,
                                 const std::vector<DenoisedSegment>& segments,
                                 const std::vector<aes::Block>& plaintexts,
                                 const aes::Block& true_key,
                                 std::span<const std::size_t> subset) {
  std::array<int, 16> pge{};
  for (int b = 0; b < 16; ++b) {
    const ByteProfile& bp = profile.bytes[b];
    const std::size_t n_poi = bp.poi_indices.size();

    // log-likelihood terms depend only on the hw class, so precompute the
    // per-class constants once per byte
    std::array<std::vector<double>, 9> inv_var, log_norm;
    for (int h = 0; h < 9; ++h) {
      inv_var[h].resize(n_poi);
      log_norm[h].resize(n_poi);
      for (std::size_t p = 0; p < n_poi; ++p) {
        inv_var[h][p] = 0.5 / bp.class_var[h][p];
        log_norm[h][p] =
            -0.5 * std::log(2.0 * std::numbers::pi * bp.class_var[h][p]);
      }
    }

    std::array<double, 256> scores{};
    for (std::size_t si : subset) {
      const auto& seg = segments[si].samples;
      const std::uint8_t pt = plaintexts[si][b];
      // hypothesis loop: class index depends only on pt ^ y
      for (int y = 0; y < 256; ++y) {
        const int h = sbox_hw_oracle(pt, std::uint8_t(y));
        double acc = 0.0;
        for (std::size_t p = 0; p < n_poi; ++p) {
          const double d = seg[bp.poi_indices[p]] - bp.class_mean[h][p];
          acc += log_norm[h][p] - d * d * inv_var[h][p];
        }
        scores[std::size_t(y)] += acc;
      }
    }
    pge[b] = rank_of(scores, true_key[b]);
  }
  return pge;
}

}  // namespace

AttackReport attack(const Profile& profile,
                    const std::vector<DenoisedSegment>& segments,
                    const std::vector<aes::Block>& plaintexts,
                    const aes::Block& true_key) {
  check_segments(segments, plaintexts);
  for (const auto& s : segments)
    if (s.size() != profile.segment_length)
      throw ContractError("attack: segment length " + std::to_string(s.size()) +
                          " does not match profile length " +
                          std::to_string(profile.segment_length));

  std::vector<std::size_t> all(segments.size());
  std::iota(all.begin(), all.end(), 0);
  const auto pge = attack_ranks(profile, segments, plaintexts, true_key, all);

  AttackReport report;
  report.pge.push_back(pge);
  std::array<double, 16> means{};
  for (int b = 0; b < 16; ++b) means[b] = pge[b];
  report.mean_pge.push_back(means);
  report.traces_used.push_back(segments.size());
  report.n_repetitions = 1;
  return report;
}

AttackReport pge_curve(const Profile& profile,
                       const std::vector<DenoisedSegment>& segments,
                       const std::vector<aes::Block>& plaintexts,
                       const aes::Block& true_key,
                       std::vector<std::size_t> steps,
                       std::size_t n_repetitions, std::uint64_t seed) {
  check_segments(segments, plaintexts);
  if (steps.empty()) throw ContractError("pge_curve: no steps given");
  if (n_repetitions == 0) throw ContractError("pge_curve: n_repetitions must be >= 1");
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  if (steps.front() == 0) throw ContractError("pge_curve: steps must be >= 1");
  if (steps.back() > segments.size())
    throw ContractError("pge_curve: largest step " + std::to_string(steps.back()) +
                        " exceeds available segments " +
                        std::to_string(segments.size()));

  const std::size_t n_steps = steps.size();
  std::vector<std::vector<std::array<int, 16>>> per_rep(
      n_repetitions, std::vector<std::array<int, 16>>(n_steps));

  parallel_for(n_repetitions, [&](std::size_t rep) {
    Rng rng(derive_seed(seed, "pge_rep" + std::to_string(rep)));
    std::vector<std::size_t> perm(segments.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size() - 1; i > 0; --i) {
      const std::size_t j = rng.uniform_below(i + 1);
      std::swap(perm[i], perm[j]);
    }
    for (std::size_t si = 0; si < n_steps; ++si) {
      std::span<const std::size_t> subset(perm.data(), steps[si]);
      per_rep[rep][si] = attack_ranks(profile, segments, plaintexts, true_key, subset);
    }
  });

  AttackReport report;
  report.n_repetitions = n_repetitions;
  report.traces_used = steps;
  report.pge.resize(n_steps);
  report.mean_pge.resize(n_steps);
  for (std::size_t si = 0; si < n_steps; ++si) {
    std::array<double, 16> mean{};
    for (std::size_t rep = 0; rep < n_repetitions; ++rep)
      for (int b = 0; b < 16; ++b) mean[b] += per_rep[rep][si][b];
    for (int b = 0; b < 16; ++b) {
      mean[b] /= double(n_repetitions);
      report.mean_pge[si][b] = mean[b];
      report.pge[si][b] = int(std::lround(mean[b]));
    }
  }
  return report;
}

bool meets_success_criterion(const std::array<double, 16>& pge_row) {
  int over = 0;
  for (double v : pge_row)
    if (v >= kPgeSuccessThreshold) ++over;
  return over <= kMaxBytesAtThreshold;
}

long first_success_step(const AttackReport& report) {
  for (std::size_t si = 0; si < report.mean_pge.size(); ++si)
    if (meets_success_criterion(report.mean_pge[si]))
      return long(report.traces_used[si]);
  return -1;
}

void save_profile(const Profile& profile, const std::filesystem::path& path) {
  nlohmann::json j;
  j["n_poi"] = profile.n_poi;
  j["segment_length"] = profile.segment_length;
  j["n_profiling"] = profile.n_profiling;
  nlohmann::json bytes = nlohmann::json::array();
  for (const auto& bp : profile.bytes) {
    nlohmann::json jb;
    jb["poi_indices"] = bp.poi_indices;
    nlohmann::json classes = nlohmann::json::array();
    for (int h = 0; h < 9; ++h) {
      classes.push_back({{"hw", h},
                         {"observed", bp.observed[h]},
                         {"mean", bp.class_mean[h]},
                         {"var", bp.class_var[h]}});
    }
    jb["classes"] = classes;
    bytes.push_back(jb);
  }
  j["bytes"] = bytes;
  j["interpolated_classes"] = profile.interpolated_classes;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
}

Profile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open profile: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed profile " + path.string() + ": " + e.what());
  }
  Profile profile;
  try {
    profile.n_poi = j.at("n_poi").get<std::size_t>();
    profile.segment_length = j.at("segment_length").get<std::size_t>();
    profile.n_profiling = j.at("n_profiling").get<std::size_t>();
    const auto& bytes = j.at("bytes");
    for (int b = 0; b < 16; ++b) {
      ByteProfile& bp = profile.bytes[b];
      const auto& jb = bytes.at(b);
      bp.poi_indices = jb.at("poi_indices").get<std::vector<std::size_t>>();
      for (const auto& jc : jb.at("classes")) {
        const int h = jc.at("hw").get<int>();
        bp.observed[h] = jc.at("observed").get<bool>();
        bp.class_mean[h] = jc.at("mean").get<std::vector<double>>();
        bp.class_var[h] = jc.at("var").get<std::vector<double>>();
      }
    }
    profile.interpolated_classes =
        j.at("interpolated_classes").get<std::vector<std::pair<int, int>>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("profile " + path.string() + " is incomplete: " + e.what());
  }
  return profile;
}

void save_plaintexts(const std::vector<aes::Block>& pts,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  for (const auto& pt : pts) out << aes::to_hex(pt) << "\n";
}

std::vector<aes::Block> load_plaintexts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open plaintext list: " + path.string());
  std::vector<aes::Block> pts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (line.empty()) continue;
    try {
      pts.push_back(aes::parse_hex_block(line));
    } catch (const ConfigError& e) {
      throw DataError("plaintext list " + path.string() + " line " +
                      std::to_string(line_no) + ": " + e.what());
    }
  }
  if (pts.empty()) throw DataError("plaintext list " + path.string() + " is empty");
  return pts;
}

}  // namespace vtrig
