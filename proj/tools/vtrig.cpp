// vtrig: trigger-free side-channel trace segmentation toolkit.
//
// Subcommands cover the full flow: synth -> period -> denoise/template ->
// pullout -> profile -> attack, plus `run` for recipe-driven experiments and
// `report` for run summaries. Exit codes: 0 ok, 2 config error, 3 data
// error, 4 nothing found (no periodicity / no CPs).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vtrig/align.hpp"
#include "vtrig/attack.hpp"
#include "vtrig/config.hpp"
#include "vtrig/errors.hpp"
#include "vtrig/experiment.hpp"
#include "vtrig/parallel.hpp"
#include "vtrig/period.hpp"
#include "vtrig/pullout.hpp"
#include "vtrig/synth.hpp"
#include "vtrig/trace.hpp"

namespace fs = std::filesystem;
using namespace vtrig;

namespace {

Trace load_trace_auto(const fs::path& path) {
  const TraceMeta meta = read_meta_sidecar(path);
  if (path.extension() == ".iq32") return load_iq_trace(path, meta);
  return load_real_trace(path, meta);
}

KeyValueConfig load_config_or_empty(const std::string& path) {
  if (path.empty()) return KeyValueConfig::from_toml_text("", "<empty>");
  return KeyValueConfig::from_file(path);
}

std::string pick_prefix(const KeyValueConfig& cfg, const std::string& section) {
  for (const auto& [k, v] : cfg.entries())
    if (k.rfind(section + ".", 0) == 0) return section + ".";
  return "";
}

std::vector<std::size_t> parse_steps(const std::string& text) {
  std::vector<std::size_t> steps;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      const long v = std::stol(tok);
      if (v < 1) throw ConfigError("steps must be >= 1");
      steps.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      throw ConfigError("cannot parse step list entry '" + tok + "'");
    }
  }
  if (steps.empty()) throw ConfigError("empty step list");
  return steps;
}

std::vector<DenoisedSegment> segments_from_matrix(const SegmentMatrix& m) {
  std::vector<DenoisedSegment> segs(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    segs[i].samples.assign(m.row(i).begin(), m.row(i).end());
    segs[i].n_averaged = 1;
    segs[i].rotation_phase = 0;
  }
  return segs;
}

void print_pge_summary(const AttackReport& report) {
  const auto& final_row = report.mean_pge.back();
  std::printf("PGE at %zu segments:", report.traces_used.back());
  for (int b = 0; b < 16; ++b) std::printf(" %.4g", final_row[b]);
  std::printf("\n");
  const long s = first_success_step(report);
  if (s >= 0)
    std::printf("success criterion (<=1 byte with PGE >= 4) first met at %ld segments\n", s);
  else
    std::printf("success criterion not met at any evaluated step\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"virtual-trigger trace segmentation and attack evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", VTRIG_VERSION);

  int jobs = 0;
  app.add_option("--jobs", jobs, "cap worker threads (0 = hardware)");

  // ---- synth ----
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic CP-series trace");
  struct {
    std::string config, out, key;
    double period = 4350.09, noise = 0.35, leak = 0.25, rate = 5e6;
    std::uint64_t seed = 1;
    long idle = 230, n_plaintexts = 1, repeats = 40, jitter = 0;
  } sy;
  synth_cmd->add_option("--config", sy.config, "synth config file (TOML-style or JSON)");
  synth_cmd->add_option("--out", sy.out, "output trace (.f32)")->required();
  auto* sy_period = synth_cmd->add_option("--period-samples", sy.period, "true fractional CP length");
  auto* sy_idle = synth_cmd->add_option("--idle-len", sy.idle, "idle samples between encryptions");
  auto* sy_npt = synth_cmd->add_option("--n-plaintexts", sy.n_plaintexts, "plaintext groups");
  auto* sy_rep = synth_cmd->add_option("--repeats", sy.repeats, "CPs per plaintext");
  auto* sy_noise = synth_cmd->add_option("--noise-sigma", sy.noise, "gaussian noise sigma");
  auto* sy_jit = synth_cmd->add_option("--jitter-max", sy.jitter, "max extra idle samples per CP");
  auto* sy_leak = synth_cmd->add_option("--leak-gain", sy.leak, "leak amplitude per HW unit");
  auto* sy_key = synth_cmd->add_option("--key", sy.key, "hex key or 'random'");
  auto* sy_rate = synth_cmd->add_option("--sample-rate", sy.rate, "sample rate in Hz");
  auto* sy_seed = synth_cmd->add_option("--seed", sy.seed, "generator seed");

  // ---- period ----
  auto* period_cmd = app.add_subcommand("period", "estimate and refine the CP length");
  struct {
    std::string trace, out_curve = "distance_curve.csv";
    long min_period = 100, max_period = 10000, steps = 1000, segments = 100;
    double interval_ns = 1000.0;
  } pe;
  period_cmd->add_option("--trace", pe.trace, "input trace (.f32/.iq32)")->required();
  period_cmd->add_option("--min-period", pe.min_period, "smallest period considered");
  period_cmd->add_option("--max-period", pe.max_period, "largest period considered");
  period_cmd->add_option("--interval-ns", pe.interval_ns, "delta sweep width in ns");
  period_cmd->add_option("--steps", pe.steps, "delta sweep steps");
  period_cmd->add_option("--segments", pe.segments, "segments per sweep evaluation");
  period_cmd->add_option("--out-curve", pe.out_curve, "distance curve CSV path");

  // ---- denoise ----
  auto* denoise_cmd = app.add_subcommand("denoise", "cut, align, average and rotate one trace");
  struct {
    std::string trace, out = "denoised.f32";
    double lcp = 0.0;
    long segments = 0, start_offset = 0, max_lag = 0, idle_window = 230;
    bool normalized = false;
  } dn;
  denoise_cmd->add_option("--trace", dn.trace)->required();
  denoise_cmd->add_option("--lcp", dn.lcp, "accurate CP length in samples")->required();
  denoise_cmd->add_option("--segments", dn.segments, "segments to cut")->required();
  denoise_cmd->add_option("--start-offset", dn.start_offset, "first cut position");
  denoise_cmd->add_option("--max-lag", dn.max_lag, "alignment search bound (0 = 5% of width)");
  denoise_cmd->add_option("--idle-window", dn.idle_window, "low-variance window size");
  denoise_cmd->add_flag("--normalized", dn.normalized, "mean-removed correlation");
  denoise_cmd->add_option("--out", dn.out, "output segment (.f32)");

  // ---- template ----
  auto* template_cmd = app.add_subcommand("template", "learn a segment template from a profiling trace");
  struct {
    std::string trace, out = "template.f32";
    double lcp = 0.0;
    long segments = 0, max_lag = 0, idle_window = 230;
    long crop_offset = 0, crop_length = 0;
  } tp;
  template_cmd->add_option("--trace", tp.trace)->required();
  template_cmd->add_option("--lcp", tp.lcp)->required();
  template_cmd->add_option("--segments", tp.segments)->required();
  template_cmd->add_option("--max-lag", tp.max_lag);
  template_cmd->add_option("--idle-window", tp.idle_window);
  template_cmd->add_option("--crop-offset", tp.crop_offset, "keep a sub-window: start");
  template_cmd->add_option("--crop-length", tp.crop_length, "keep a sub-window: length (0 = full)");
  template_cmd->add_option("--out", tp.out);

  // ---- pullout ----
  auto* pullout_cmd = app.add_subcommand("pullout", "locate and extract CP segments by pattern matching");
  struct {
    std::string trace, tmpl, out_segments = "segments.bin", out_detections = "detections.csv";
    double threshold = kDefaultDetectionThreshold;
    long min_spacing = 0;
  } po;
  pullout_cmd->add_option("--trace", po.trace)->required();
  pullout_cmd->add_option("--template", po.tmpl)->required();
  pullout_cmd->add_option("--threshold", po.threshold, "detection score threshold in (0,1]");
  pullout_cmd->add_option("--min-spacing", po.min_spacing, "min distance between detections (0 = 80% of width)");
  pullout_cmd->add_option("--out-segments", po.out_segments);
  pullout_cmd->add_option("--out-detections", po.out_detections);

  // ---- profile ----
  auto* profile_cmd = app.add_subcommand("profile", "build per-key-byte Gaussian templates");
  struct {
    std::string segments, plaintexts, key, out = "profile.json";
    long n_poi = 2;
  } pf;
  profile_cmd->add_option("--segments", pf.segments, "segments.bin")->required();
  profile_cmd->add_option("--plaintexts", pf.plaintexts, "hex plaintext per line")->required();
  profile_cmd->add_option("--key", pf.key, "profiling key (hex)")->required();
  profile_cmd->add_option("--n-poi", pf.n_poi, "points of interest per byte");
  profile_cmd->add_option("--out", pf.out);

  // ---- attack ----
  auto* attack_cmd = app.add_subcommand("attack", "score key hypotheses and report PGE");
  struct {
    std::string segments, plaintexts, profile, true_key, steps;
    std::string out = "pge.csv", grid = "pge_grid.txt";
    long reps = 30;
    std::uint64_t seed = 1;
  } at;
  attack_cmd->add_option("--segments", at.segments)->required();
  attack_cmd->add_option("--plaintexts", at.plaintexts)->required();
  attack_cmd->add_option("--profile", at.profile)->required();
  attack_cmd->add_option("--true-key", at.true_key, "key to rank (hex)")->required();
  attack_cmd->add_option("--steps", at.steps, "comma-separated segment counts (default: all, single attack)");
  attack_cmd->add_option("--reps", at.reps, "repetitions with shuffled segment order");
  attack_cmd->add_option("--seed", at.seed);
  attack_cmd->add_option("--out", at.out);
  attack_cmd->add_option("--grid", at.grid);

  // ---- sweep ----
  auto* sweep_cmd = app.add_subcommand("sweep", "attack efficiency vs forced CP-length offsets");
  struct {
    std::string config, out_dir = "sweep_run";
    std::uint64_t seed = 0;
  } sw;
  sweep_cmd->add_option("--config", sw.config, "recipe with a [sweep] section")->required();
  sweep_cmd->add_option("--out-dir", sw.out_dir);
  auto* sw_seed = sweep_cmd->add_option("--seed", sw.seed, "override recipe seed");

  // ---- run ----
  auto* run_cmd = app.add_subcommand("run", "execute a full experiment recipe");
  struct {
    std::string config, out_dir = "run";
    std::uint64_t seed = 0;
  } rn;
  run_cmd->add_option("--config", rn.config, "experiment recipe (TOML-style or JSON)")->required();
  run_cmd->add_option("--out-dir", rn.out_dir);
  auto* rn_seed = run_cmd->add_option("--seed", rn.seed, "override recipe seed");

  // ---- report ----
  auto* report_cmd = app.add_subcommand("report", "summarize a run directory");
  struct {
    std::string run_dir, compare;
  } rp;
  report_cmd->add_option("run_dir", rp.run_dir)->required();
  report_cmd->add_option("--compare", rp.compare, "second run directory for timing ratios");

  try {
    app.parse(argc, argv);
    set_default_jobs(jobs);

    if (*synth_cmd) {
      KeyValueConfig cfg = load_config_or_empty(sy.config);
      const std::string prefix = pick_prefix(cfg, "synth");
      // flags win over config entries
      if (*sy_period) cfg.set(prefix + "period_samples", sy.period);
      if (*sy_idle) cfg.set(prefix + "idle_len", std::int64_t(sy.idle));
      if (*sy_npt) cfg.set(prefix + "n_plaintexts", std::int64_t(sy.n_plaintexts));
      if (*sy_rep) cfg.set(prefix + "repeats", std::int64_t(sy.repeats));
      if (*sy_noise) cfg.set(prefix + "noise_sigma", sy.noise);
      if (*sy_jit) cfg.set(prefix + "jitter_max", std::int64_t(sy.jitter));
      if (*sy_leak) cfg.set(prefix + "leak_gain", sy.leak);
      if (*sy_key) cfg.set(prefix + "key", sy.key);
      if (*sy_rate) cfg.set(prefix + "sample_rate_hz", sy.rate);
      std::uint64_t seed = *sy_seed ? sy.seed
                                    : static_cast<std::uint64_t>(cfg.get_int(
                                          prefix.empty() ? "seed" : prefix + "seed",
                                          cfg.get_int("seed", 1)));
      const SynthConfig sc = synth_config_from(cfg, prefix, seed);
      auto [trace, truth] = generate(sc);

      const fs::path out = sy.out;
      save_real_trace(trace, out);
      TraceMeta meta;
      meta.sample_rate_hz = sc.sample_rate_hz;
      meta.notes = "synthetic CP series";
      write_meta_sidecar(out, meta);
      fs::path truth_path = out;
      truth_path.replace_extension(".truth.json");
      save_ground_truth(truth, truth_path);
      std::printf("wrote %zu samples (%zu CPs, period %.6g) to %s\n",
                  trace.size(), truth.cp_start_indices.size(),
                  sc.period_samples, out.string().c_str());
      std::printf("ground truth: %s\n", truth_path.string().c_str());
    }

    if (*period_cmd) {
      const Trace trace = load_trace_auto(pe.trace);
      const auto approx = estimate_period_autocorr(
          trace, static_cast<std::size_t>(pe.min_period),
          static_cast<std::size_t>(pe.max_period));
      std::printf("approximate CP length: %.6f samples (%.6f us at %.4g Hz)\n",
                  approx.l_cp_samples,
                  approx.l_cp_samples / trace.sample_rate_hz * 1e6,
                  trace.sample_rate_hz);
      const double interval_samples =
          pe.interval_ns * 1e-9 * trace.sample_rate_hz;
      const auto refined = refine_period(trace, approx, interval_samples,
                                         static_cast<std::size_t>(pe.steps),
                                         static_cast<std::size_t>(pe.segments));
      std::printf("refined CP length:     %.6f samples (delta %+.6f samples, %+.3f ns)\n",
                  refined.l_cp_samples, refined.l_cp_samples - approx.l_cp_samples,
                  (refined.l_cp_samples - approx.l_cp_samples) /
                      trace.sample_rate_hz * 1e9);
      for (double d : refined.ambiguous_deltas)
        std::fprintf(stderr,
                     "warning: ambiguous delta minimum near %+.6f samples\n", d);
      std::ofstream curve(pe.out_curve, std::ios::trunc);
      if (!curve) throw DataError("cannot write: " + pe.out_curve);
      curve << "delta_ns,delta_samples,l1\n";
      char line[96];
      for (const auto& [delta, l1] : refined.distance_curve) {
        std::snprintf(line, sizeof(line), "%.10g,%.10g,%.10g\n",
                      delta / trace.sample_rate_hz * 1e9, delta, l1);
        curve << line;
      }
      std::printf("distance curve: %s (%zu points)\n", pe.out_curve.c_str(),
                  refined.distance_curve.size());
    }

    if (*denoise_cmd) {
      const Trace trace = load_trace_auto(dn.trace);
      AlignmentParams params;
      params.max_lag = static_cast<std::size_t>(dn.max_lag);
      params.idle_window = static_cast<std::size_t>(dn.idle_window);
      params.correlation_mode =
          dn.normalized ? CorrelationMode::normalized : CorrelationMode::plain;
      std::vector<long> shifts;
      const auto segment = denoise_pipeline(
          trace, dn.lcp, static_cast<std::size_t>(dn.segments), params,
          static_cast<std::size_t>(dn.start_offset), &shifts);

      Trace out_trace;
      out_trace.samples = segment.samples;
      out_trace.sample_rate_hz = trace.sample_rate_hz;
      save_real_trace(out_trace, dn.out);
      TraceMeta meta;
      meta.sample_rate_hz = trace.sample_rate_hz;
      meta.notes = "denoised CP segment";
      write_meta_sidecar(dn.out, meta);

      std::map<long, std::size_t> histogram;
      for (long s : shifts) ++histogram[s];
      nlohmann::json j;
      j["n_averaged"] = segment.n_averaged;
      j["rotation_phase"] = segment.rotation_phase;
      nlohmann::json hist = nlohmann::json::object();
      for (const auto& [lag, count] : histogram)
        hist[std::to_string(lag)] = count;
      j["shifts_histogram"] = hist;
      std::ofstream prov(dn.out + ".prov.json", std::ios::trunc);
      prov << j.dump(2) << "\n";
      std::printf("denoised %zu segments, rotation phase %zu -> %s\n",
                  segment.n_averaged, segment.rotation_phase, dn.out.c_str());
    }

    if (*template_cmd) {
      const Trace trace = load_trace_auto(tp.trace);
      AlignmentParams params;
      params.max_lag = static_cast<std::size_t>(tp.max_lag);
      params.idle_window = static_cast<std::size_t>(tp.idle_window);
      CropWindow crop{static_cast<std::size_t>(tp.crop_offset),
                      static_cast<std::size_t>(tp.crop_length)};
      const auto tmpl = learn_template(trace, tp.lcp,
                                       static_cast<std::size_t>(tp.segments),
                                       params, crop);
      Trace out_trace;
      out_trace.samples = tmpl.samples;
      out_trace.sample_rate_hz = trace.sample_rate_hz;
      save_real_trace(out_trace, tp.out);
      TraceMeta meta;
      meta.sample_rate_hz = trace.sample_rate_hz;
      meta.notes = "learned segment template";
      write_meta_sidecar(tp.out, meta);
      nlohmann::json j;
      j["n_averaged"] = tmpl.n_averaged;
      j["source"] = tmpl.source_id;
      std::ofstream prov(tp.out + ".prov.json", std::ios::trunc);
      prov << j.dump(2) << "\n";
      std::printf("template of %zu samples (averaged %zu segments) -> %s\n",
                  tmpl.size(), tmpl.n_averaged, tp.out.c_str());
    }

    if (*pullout_cmd) {
      const Trace trace = load_trace_auto(po.trace);
      const Trace tmpl_trace = load_trace_auto(po.tmpl);
      SegmentTemplate tmpl;
      tmpl.samples = tmpl_trace.samples;
      tmpl.source_id = po.tmpl;

      const std::size_t spacing = po.min_spacing > 0
                                      ? static_cast<std::size_t>(po.min_spacing)
                                      : default_min_spacing(tmpl.size());
      const auto detections = find_occurrences(trace, tmpl, po.threshold, spacing);

      std::ofstream det(po.out_detections, std::ios::trunc);
      if (!det) throw DataError("cannot write: " + po.out_detections);
      det << "offset,score\n";
      char line[64];
      for (const auto& d : detections) {
        std::snprintf(line, sizeof(line), "%zu,%.10g\n", d.offset, d.score);
        det << line;
      }

      const auto rows = pullout_segments(trace, tmpl, po.threshold, spacing);
      save_segment_matrix(rows, po.out_segments);
      std::printf("%zu detections -> %s, segments -> %s\n", detections.size(),
                  po.out_detections.c_str(), po.out_segments.c_str());
    }

    if (*profile_cmd) {
      const auto matrix = load_segment_matrix(pf.segments);
      const auto segs = segments_from_matrix(matrix);
      const auto pts = load_plaintexts(pf.plaintexts);
      const auto key = aes::parse_hex_block(pf.key);
      const auto profile =
          build_profile(segs, pts, key, static_cast<std::size_t>(pf.n_poi));
      for (const auto& [b, h] : profile.interpolated_classes)
        std::fprintf(stderr, "warning: byte %d hw class %d unseen, interpolated\n",
                     b, h);
      save_profile(profile, pf.out);
      std::printf("profile over %zu segments (%zu POIs per byte) -> %s\n",
                  profile.n_profiling, profile.n_poi, pf.out.c_str());
    }

    if (*attack_cmd) {
      const auto matrix = load_segment_matrix(at.segments);
      const auto segs = segments_from_matrix(matrix);
      const auto pts = load_plaintexts(at.plaintexts);
      const auto profile = load_profile(at.profile);
      const auto key = aes::parse_hex_block(at.true_key);

      AttackReport report;
      if (at.steps.empty()) {
        report = attack(profile, segs, pts, key);
      } else {
        report = pge_curve(profile, segs, pts, key, parse_steps(at.steps),
                           static_cast<std::size_t>(at.reps), at.seed);
      }
      write_pge_csv(report, at.out);
      write_pge_grid(report, at.grid);
      print_pge_summary(report);
      std::printf("pge curve -> %s, grid -> %s\n", at.out.c_str(), at.grid.c_str());
    }

    if (*sweep_cmd) {
      const auto recipe = KeyValueConfig::from_file(sw.config);
      const auto entries =
          run_precision_sweep(recipe, sw.out_dir, sw.seed, sw_seed->count() > 0);
      std::printf("offset_pct  offset_samples  final_mean_pge  success  first_success\n");
      for (const auto& e : entries)
        std::printf("%9.4g  %14.6g  %14.6g  %7s  %13ld\n", e.offset_pct,
                    e.offset_samples, e.final_mean_pge,
                    e.success ? "yes" : "no", e.first_success_step);
      std::printf("artifacts under %s\n", sw.out_dir.c_str());
    }

    if (*run_cmd) {
      const auto recipe = KeyValueConfig::from_file(rn.config);
      run_experiment(recipe, rn.out_dir, rn.seed, rn_seed->count() > 0);
      std::fputs(report_run(rn.out_dir).c_str(), stdout);
    }

    if (*report_cmd) {
      if (rp.compare.empty())
        std::fputs(report_run(rp.run_dir).c_str(), stdout);
      else
        std::fputs(report_compare(rp.run_dir, rp.compare).c_str(), stdout);
    }

    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const NoPeriodicityError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 4;
  } catch (const NoCpsFoundError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 4;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
