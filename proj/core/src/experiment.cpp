#include "vtrig/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vtrig/align.hpp"
#include "vtrig/dsp.hpp"
#include "vtrig/errors.hpp"
#include "vtrig/parallel.hpp"
#include "vtrig/period.hpp"
#include "vtrig/pullout.hpp"
#include "vtrig/rng.hpp"
#include "vtrig/trace.hpp"

namespace vtrig {

namespace fs = std::filesystem;

namespace {

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string hex_u64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

aes::Block random_block(Rng& rng) {
  aes::Block b;
  for (auto& byte : b) byte = static_cast<std::uint8_t>(rng.uniform_below(256));
  return b;
}

SegmentMatrix matrix_from_segments(const std::vector<DenoisedSegment>& segs) {
  SegmentMatrix m(segs.size(), segs.empty() ? 0 : segs.front().size());
  m.origin_offsets.resize(segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    std::copy(segs[i].samples.begin(), segs[i].samples.end(), m.row(i).begin());
    m.origin_offsets[i] = i;
  }
  return m;
}

// Shared state while executing stages of one run.
struct Runner {
  const KeyValueConfig& cfg;
  fs::path out;
  RunManifest manifest;
  fs::path manifest_path;

  Runner(const KeyValueConfig& c, const fs::path& dir)
      : cfg(c), out(dir), manifest_path(dir / "manifest.json") {}

  template <typename Fn>
  StageRecord& stage(const std::string& name, Fn&& fn) {
    StageRecord rec;
    rec.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn(rec);
    } catch (const std::exception& e) {
      rec.status = "failed";
      rec.warnings.push_back(std::string("error: ") + e.what());
      rec.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
      manifest.stages.push_back(rec);
      save_manifest(manifest, manifest_path);
      throw;
    }
    rec.status = "ok";
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    manifest.stages.push_back(rec);
    save_manifest(manifest, manifest_path);
    return manifest.stages.back();
  }
};

std::vector<std::size_t> steps_from(const KeyValueConfig& cfg, std::size_t n_attack,
                                    std::vector<std::string>* warnings) {
  std::vector<double> raw = cfg.get_number_array(
      "attack.steps", {5, 10, 15, 20, 30, 40, 50, 75, 100});
  std::vector<std::size_t> steps;
  for (double v : raw) {
    if (v < 1.0) throw ConfigError("attack.steps: entries must be >= 1");
    const auto s = static_cast<std::size_t>(v);
    if (s > n_attack) {
      if (warnings)
        warnings->push_back("attack.steps: dropped step " + std::to_string(s) +
                            " beyond available " + std::to_string(n_attack) +
                            " segments");
      continue;
    }
    steps.push_back(s);
  }
  if (steps.empty())
    throw ConfigError("attack.steps: no usable steps below n_attack");
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  return steps;
}

double final_mean_over_bytes(const AttackReport& report) {
  const auto& row = report.mean_pge.back();
  return std::accumulate(row.begin(), row.end(), 0.0) / 16.0;
}

}  // namespace

void save_manifest(const RunManifest& m, const fs::path& path) {
  nlohmann::json j;
  j["tool_version"] = m.tool_version;
  j["seed"] = m.seed;
  j["config_hash"] = m.config_hash;
  j["title"] = m.title;
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : m.stages) {
    stages.push_back({{"name", s.name},
                      {"status", s.status},
                      {"wall_ms", s.wall_ms},
                      {"warnings", s.warnings},
                      {"artifacts", s.artifacts}});
  }
  j["stages"] = stages;
  std::ofstream o(path, std::ios::trunc);
  if (!o) throw DataError("cannot write manifest: " + path.string());
  o << j.dump(2) << "\n";
}

RunManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing manifest: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }
  RunManifest m;
  m.tool_version = j.value("tool_version", "");
  m.seed = j.value("seed", std::uint64_t{0});
  m.config_hash = j.value("config_hash", "");
  m.title = j.value("title", "");
  for (const auto& js : j.value("stages", nlohmann::json::array())) {
    StageRecord s;
    s.name = js.value("name", "");
    s.status = js.value("status", "");
    s.wall_ms = js.value("wall_ms", 0.0);
    s.warnings = js.value("warnings", std::vector<std::string>{});
    s.artifacts = js.value("artifacts", std::vector<std::string>{});
    m.stages.push_back(std::move(s));
  }
  return m;
}

SynthConfig synth_config_from(const KeyValueConfig& cfg, const std::string& prefix,
                              std::uint64_t seed) {
  SynthConfig sc;
  sc.period_samples = cfg.get_number(prefix + "period_samples", 4350.09);
  sc.idle_len = static_cast<std::size_t>(cfg.get_int(prefix + "idle_len", 230));
  sc.noise_sigma = cfg.get_number(prefix + "noise_sigma", 0.35);
  sc.jitter_max = static_cast<std::size_t>(cfg.get_int(prefix + "jitter_max", 0));
  sc.leak_gain = cfg.get_number(prefix + "leak_gain", 0.25);
  sc.repeats_per_plaintext =
      static_cast<std::size_t>(cfg.get_int(prefix + "repeats", 40));
  sc.sample_rate_hz = cfg.get_number(prefix + "sample_rate_hz", 5e6);
  sc.seed = seed;

  const std::string key = cfg.get_string(prefix + "key", "random");
  Rng key_rng(derive_seed(seed, "key"));
  sc.key = key == "random" ? random_block(key_rng) : aes::parse_hex_block(key);

  const auto n_plaintexts =
      static_cast<std::size_t>(cfg.get_int(prefix + "n_plaintexts", 1));
  if (n_plaintexts == 0) throw ConfigError(prefix + "n_plaintexts must be >= 1");
  Rng pt_rng(derive_seed(seed, "plaintexts"));
  sc.plaintexts.reserve(n_plaintexts);
  for (std::size_t i = 0; i < n_plaintexts; ++i)
    sc.plaintexts.push_back(random_block(pt_rng));
  sc.n_cps = n_plaintexts * sc.repeats_per_plaintext;
  return sc;
}

namespace {

// Everything the attack stages need, prepared once by the front half of a
// run: refined length, profile, template, attack plaintexts and per-trace
// seeds so segment sets can be re-denoised at forced length offsets.
struct PreparedRun {
  SynthConfig base;  // per-trace template (plaintexts filled per trace)
  std::size_t repeats = 0;
  std::size_t n_attack = 0;
  std::size_t den_segments = 0;
  std::size_t jitter_attack = 0;
  AlignmentParams aparams;
  double l_cp = 0.0;  // refined estimate used by every downstream cut
  aes::Block key{};
  std::vector<aes::Block> attack_pts;
  Profile profile;
  SegmentTemplate tmpl;
  bool want_vt = false;
  bool want_pullout = false;
  double pullout_threshold = kDefaultDetectionThreshold;
  std::size_t pullout_min_spacing = 0;
  std::size_t pullout_realign = 2;
  std::vector<std::size_t> steps;
  std::size_t repetitions = 30;
  std::uint64_t root_seed = 0;
};

Trace slice_from(const Trace& trace, std::size_t offset) {
  Trace sub;
  sub.samples.assign(trace.samples.begin() + long(offset), trace.samples.end());
  sub.sample_rate_hz = trace.sample_rate_hz;
  sub.source_id = trace.source_id;
  return sub;
}

// Denoise one attack capture with the VT pipeline at the given length.
DenoisedSegment attack_vt_segment(const PreparedRun& run, std::size_t index,
                                  double l_cp) {
  SynthConfig sc = run.base;
  sc.plaintexts = {run.attack_pts[index]};
  sc.n_cps = run.repeats;
  sc.jitter_max = run.jitter_attack;
  sc.seed = derive_seed(run.root_seed, "att_trace" + std::to_string(index));
  auto [trace, truth] = generate(sc);
  Rng off_rng(derive_seed(run.root_seed, "att_off" + std::to_string(index)));
  const auto offset = static_cast<std::size_t>(
      off_rng.uniform_below(static_cast<std::uint64_t>(sc.period_samples)));
  return denoise_pipeline(slice_from(trace, offset), l_cp, run.den_segments,
                          run.aparams);
}

DenoisedSegment attack_pullout_segment(const PreparedRun& run, std::size_t index) {
  SynthConfig sc = run.base;
  sc.plaintexts = {run.attack_pts[index]};
  sc.n_cps = run.repeats;
  sc.jitter_max = run.jitter_attack;
  sc.seed = derive_seed(run.root_seed, "att_trace" + std::to_string(index));
  auto [trace, truth] = generate(sc);
  Rng off_rng(derive_seed(run.root_seed, "att_off" + std::to_string(index)));
  const auto offset = static_cast<std::size_t>(
      off_rng.uniform_below(static_cast<std::uint64_t>(sc.period_samples)));
  const Trace sub = slice_from(trace, offset);
  const auto rows = pullout_segments(sub, run.tmpl, run.pullout_threshold,
                                     run.pullout_min_spacing);
  return average_pullout(rows, run.tmpl, run.pullout_realign);
}

}  // namespace

ExperimentResult run_experiment(const KeyValueConfig& recipe,
                                const fs::path& output_dir,
                                std::uint64_t seed_override,
                                bool has_seed_override) {
  fs::create_directories(output_dir);
  Runner runner(recipe, output_dir);

  const std::uint64_t root_seed =
      has_seed_override ? seed_override
                        : static_cast<std::uint64_t>(recipe.get_int("seed", 1));
  runner.manifest.tool_version = VTRIG_VERSION;
  runner.manifest.seed = root_seed;
  runner.manifest.config_hash = hex_u64(fnv1a64(recipe.raw_text()));
  runner.manifest.title = recipe.get_string("title", "experiment");

  PreparedRun run;
  run.root_seed = root_seed;
  run.base = synth_config_from(recipe, "synth.", root_seed);
  run.base.jitter_max = 0;  // profiling collection is always jitter-free
  run.repeats = run.base.repeats_per_plaintext;
  if (run.repeats < 3) throw ConfigError("synth.repeats must be >= 3");
  run.key = run.base.key;
  run.n_attack = static_cast<std::size_t>(recipe.get_int("synth.n_attack", 128));
  run.jitter_attack =
      static_cast<std::size_t>(recipe.get_int("synth.jitter_max", 0));
  const auto n_profiling =
      static_cast<std::size_t>(recipe.get_int("synth.n_profiling", 256));
  if (n_profiling < 2) throw ConfigError("synth.n_profiling must be >= 2");
  if (run.n_attack < 1) throw ConfigError("synth.n_attack must be >= 1");

  run.den_segments = static_cast<std::size_t>(recipe.get_int("denoise.segments", 0));
  if (run.den_segments == 0)
    run.den_segments = std::max<std::size_t>(2, run.repeats - 2);
  run.aparams.max_lag = static_cast<std::size_t>(recipe.get_int("denoise.max_lag", 0));
  run.aparams.idle_window =
      static_cast<std::size_t>(recipe.get_int("denoise.idle_window", 0));
  if (run.aparams.idle_window == 0) run.aparams.idle_window = run.base.idle_len;
  run.aparams.correlation_mode = recipe.get_bool("denoise.normalized", false)
                                     ? CorrelationMode::normalized
                                     : CorrelationMode::plain;

  std::vector<std::string> branch_names{"vt"};
  if (recipe.has("attack.branches")) {
    const auto* v = &recipe.entries().at("attack.branches");
    if (const auto* arr = std::get_if<std::vector<std::string>>(v))
      branch_names = *arr;
    else
      throw ConfigError("attack.branches must be a string array");
  }
  for (const auto& b : branch_names) {
    if (b == "vt")
      run.want_vt = true;
    else if (b == "pullout")
      run.want_pullout = true;
    else
      throw ConfigError("attack.branches: unknown branch '" + b + "'");
  }

  run.pullout_threshold =
      recipe.get_number("pullout.threshold", kDefaultDetectionThreshold);
  run.pullout_min_spacing =
      static_cast<std::size_t>(recipe.get_int("pullout.min_spacing", 0));
  run.pullout_realign =
      static_cast<std::size_t>(recipe.get_int("pullout.realign_lag", 2));

  run.repetitions =
      static_cast<std::size_t>(recipe.get_int("attack.repetitions", 30));
  const auto n_poi = static_cast<std::size_t>(recipe.get_int("attack.n_poi", 2));

  // plaintext schedules
  std::vector<aes::Block> prof_pts(n_profiling);
  {
    Rng pt_rng(derive_seed(root_seed, "profiling_pts"));
    for (auto& pt : prof_pts) pt = random_block(pt_rng);
  }
  run.attack_pts.resize(run.n_attack);
  {
    Rng pt_rng(derive_seed(root_seed, "attack_pts"));
    for (auto& pt : run.attack_pts) pt = random_block(pt_rng);
  }

  ExperimentResult result;
  result.true_l_cp = run.base.period_samples;

  // ---- synth: the period-estimation capture ----
  Trace period_trace;
  runner.stage("synth", [&](StageRecord& rec) {
    SynthConfig pc = run.base;
    const auto trace_cps =
        static_cast<std::size_t>(recipe.get_int("period.trace_cps", 120));
    Rng pt_rng(derive_seed(root_seed, "period_pt"));
    pc.plaintexts = {random_block(pt_rng)};
    pc.repeats_per_plaintext = trace_cps;
    pc.n_cps = trace_cps;
    pc.seed = derive_seed(root_seed, "period_trace");
    auto [trace, truth] = generate(pc);
    period_trace = std::move(trace);

    const auto trace_path = runner.out / "period_trace.f32";
    save_real_trace(period_trace, trace_path);
    TraceMeta meta;
    meta.sample_rate_hz = period_trace.sample_rate_hz;
    meta.notes = "synthetic period-estimation capture";
    write_meta_sidecar(trace_path, meta);
    save_ground_truth(truth, runner.out / "period_trace.truth.json");
    rec.artifacts = {"period_trace.f32", "period_trace.f32.meta.json",
                     "period_trace.truth.json"};
  });

  // ---- period: approximate then refined length ----
  runner.stage("period", [&](StageRecord& rec) {
    const auto min_period =
        static_cast<std::size_t>(recipe.get_int("period.min_period", 100));
    const auto max_period =
        static_cast<std::size_t>(recipe.get_int("period.max_period", 10000));
    const double interval_ns = recipe.get_number("period.interval_ns", 1000.0);
    const auto n_steps = static_cast<std::size_t>(recipe.get_int("period.steps", 1000));
    const auto n_segments =
        static_cast<std::size_t>(recipe.get_int("period.segments", 100));

    const auto approx = estimate_period_autocorr(period_trace, min_period, max_period);
    const double interval_samples =
        interval_ns * 1e-9 * period_trace.sample_rate_hz;
    const auto refined =
        refine_period(period_trace, approx, interval_samples, n_steps, n_segments);
    run.l_cp = refined.l_cp_samples;
    result.refined_l_cp = refined.l_cp_samples;

    for (double d : refined.ambiguous_deltas)
      rec.warnings.push_back("ambiguous delta minimum near " + fmt_g(d) +
                             " samples (within 5% of the global minimum)");

    std::ofstream curve(runner.out / "distance_curve.csv", std::ios::trunc);
    curve << "delta_ns,delta_samples,l1\n";
    for (const auto& [delta, l1] : refined.distance_curve)
      curve << fmt_g(delta / period_trace.sample_rate_hz * 1e9) << ","
            << fmt_g(delta) << "," << fmt_g(l1) << "\n";

    nlohmann::json j;
    j["approximate_l_cp"] = approx.l_cp_samples;
    j["refined_l_cp"] = refined.l_cp_samples;
    j["true_l_cp"] = run.base.period_samples;
    j["peak_spacings"] = approx.peak_spacings;
    j["ambiguous_deltas"] = refined.ambiguous_deltas;
    std::ofstream pj(runner.out / "period.json", std::ios::trunc);
    pj << j.dump(2) << "\n";
    rec.artifacts = {"distance_curve.csv", "period.json"};
  });

  // ---- profiling: denoised segment per profiling plaintext ----
  std::vector<DenoisedSegment> prof_segs(n_profiling);
  runner.stage("profiling", [&](StageRecord& rec) {
    parallel_for(n_profiling, [&](std::size_t i) {
      SynthConfig sc = run.base;
      sc.plaintexts = {prof_pts[i]};
      sc.n_cps = run.repeats;
      sc.seed = derive_seed(root_seed, "prof_trace" + std::to_string(i));
      auto [trace, truth] = generate(sc);
      Rng off_rng(derive_seed(root_seed, "prof_off" + std::to_string(i)));
      const auto offset = static_cast<std::size_t>(
          off_rng.uniform_below(static_cast<std::uint64_t>(sc.period_samples)));
      prof_segs[i] = denoise_pipeline(slice_from(trace, offset), run.l_cp,
                                      run.den_segments, run.aparams);
    });
    save_segment_matrix(matrix_from_segments(prof_segs),
                        runner.out / "profiling_segments.bin");
    save_plaintexts(prof_pts, runner.out / "profiling_plaintexts.txt");
    std::ofstream keyf(runner.out / "key.txt", std::ios::trunc);
    keyf << aes::to_hex(run.key) << "\n";
    rec.artifacts = {"profiling_segments.bin", "profiling_plaintexts.txt",
                     "key.txt"};
  });

  // ---- template: learned pattern for the pullout branch ----
  if (run.want_pullout) {
    runner.stage("template", [&](StageRecord& rec) {
      SynthConfig sc = run.base;
      Rng pt_rng(derive_seed(root_seed, "template_pt"));
      sc.plaintexts = {random_block(pt_rng)};
      sc.n_cps = run.repeats;
      sc.seed = derive_seed(root_seed, "template_trace");
      auto [trace, truth] = generate(sc);
      CropWindow crop;
      crop.offset = static_cast<std::size_t>(recipe.get_int("pullout.crop_offset", 0));
      crop.length = static_cast<std::size_t>(recipe.get_int("pullout.crop_length", 0));
      run.tmpl = learn_template(trace, run.l_cp, run.den_segments, run.aparams, crop);

      Trace tpl_trace;
      tpl_trace.samples = run.tmpl.samples;
      tpl_trace.sample_rate_hz = run.base.sample_rate_hz;
      const auto tpl_path = runner.out / "template.f32";
      save_real_trace(tpl_trace, tpl_path);
      TraceMeta meta;
      meta.sample_rate_hz = run.base.sample_rate_hz;
      meta.notes = "learned segment template";
      write_meta_sidecar(tpl_path, meta);
      rec.artifacts = {"template.f32", "template.f32.meta.json"};
    });
  }

  // ---- profile: Gaussian templates at correlation-selected POIs ----
  runner.stage("profile", [&](StageRecord& rec) {
    run.profile = build_profile(prof_segs, prof_pts, run.key, n_poi);
    for (const auto& [b, h] : run.profile.interpolated_classes)
      rec.warnings.push_back("byte " + std::to_string(b) + ": hw class " +
                             std::to_string(h) +
                             " unseen in profiling, interpolated");
    save_profile(run.profile, runner.out / "profile.json");
    rec.artifacts = {"profile.json"};
  });

  // ---- attack-collect: victim segment sets per branch ----
  std::vector<DenoisedSegment> vt_segs, po_segs;
  runner.stage("attack-collect", [&](StageRecord& rec) {
    if (run.want_vt) {
      vt_segs.resize(run.n_attack);
      parallel_for(run.n_attack, [&](std::size_t i) {
        vt_segs[i] = attack_vt_segment(run, i, run.l_cp);
      });
      save_segment_matrix(matrix_from_segments(vt_segs),
                          runner.out / "attack_segments_vt.bin");
      rec.artifacts.push_back("attack_segments_vt.bin");
    }
    if (run.want_pullout) {
      po_segs.resize(run.n_attack);
      parallel_for(run.n_attack, [&](std::size_t i) {
        po_segs[i] = attack_pullout_segment(run, i);
      });
      save_segment_matrix(matrix_from_segments(po_segs),
                          runner.out / "attack_segments_pullout.bin");
      rec.artifacts.push_back("attack_segments_pullout.bin");
    }
    save_plaintexts(run.attack_pts, runner.out / "attack_plaintexts.txt");
    rec.artifacts.push_back("attack_plaintexts.txt");
  });

  // ---- attack: PGE curves ----
  runner.stage("attack", [&](StageRecord& rec) {
    run.steps = steps_from(recipe, run.n_attack, &rec.warnings);
    nlohmann::json summary;
    summary["l_cp_refined"] = run.l_cp;
    summary["l_cp_true"] = run.base.period_samples;
    auto run_branch = [&](const std::string& name,
                          const std::vector<DenoisedSegment>& segs) {
      const auto report =
          pge_curve(run.profile, segs, run.attack_pts, run.key, run.steps,
                    run.repetitions, derive_seed(root_seed, "attack_" + name));
      write_pge_csv(report, runner.out / ("pge_" + name + ".csv"));
      write_pge_grid(report, runner.out / ("pge_grid_" + name + ".txt"));
      rec.artifacts.push_back("pge_" + name + ".csv");
      rec.artifacts.push_back("pge_grid_" + name + ".txt");
      summary["branches"][name] = {
          {"first_success_step", first_success_step(report)},
          {"final_mean_pge", final_mean_over_bytes(report)},
          {"success_at_final", meets_success_criterion(report.mean_pge.back())}};
      result.reports.emplace_back(name, report);
    };
    if (run.want_vt) run_branch("vt", vt_segs);
    if (run.want_pullout) run_branch("pullout", po_segs);
    std::ofstream sj(runner.out / "summary.json", std::ios::trunc);
    sj << summary.dump(2) << "\n";
    rec.artifacts.push_back("summary.json");
  });

  // ---- sweep: forced CP-length offsets (Fig. 8 analog) ----
  if (recipe.has("sweep.offsets_pct")) {
    runner.stage("sweep", [&](StageRecord& rec) {
      auto offsets = recipe.get_number_array("sweep.offsets_pct", {});
      if (std::find(offsets.begin(), offsets.end(), 0.0) == offsets.end())
        throw ConfigError("sweep.offsets_pct must include 0");
      std::vector<double> unique_offsets;
      for (double o : offsets) {
        if (std::find(unique_offsets.begin(), unique_offsets.end(), o) !=
            unique_offsets.end()) {
          rec.warnings.push_back("sweep: duplicate offset " + fmt_g(o) +
                                 "% dropped");
          continue;
        }
        unique_offsets.push_back(o);
      }

      std::ofstream sum(runner.out / "sweep_summary.csv", std::ios::trunc);
      sum << "offset_pct,offset_samples,final_mean_pge,success,first_success_step\n";
      for (std::size_t oi = 0; oi < unique_offsets.size(); ++oi) {
        const double pct = unique_offsets[oi];
        const double off_samples = run.l_cp * pct / 100.0;
        const double forced = run.l_cp + off_samples;

        std::vector<DenoisedSegment> segs(run.n_attack);
        parallel_for(run.n_attack, [&](std::size_t i) {
          segs[i] = attack_vt_segment(run, i, forced);
        });
        const auto report = pge_curve(
            run.profile, segs, run.attack_pts, run.key, run.steps,
            run.repetitions,
            derive_seed(root_seed, "sweep_attack" + std::to_string(oi)));

        SweepEntry entry;
        entry.offset_pct = pct;
        entry.offset_samples = off_samples;
        entry.report = report;
        entry.final_mean_pge = final_mean_over_bytes(report);
        entry.success = meets_success_criterion(report.mean_pge.back());
        entry.first_success_step = first_success_step(report);

        const std::string csv_name = "sweep_pge_" + std::to_string(oi) + ".csv";
        write_pge_csv(report, runner.out / csv_name);
        rec.artifacts.push_back(csv_name);
        sum << fmt_g(pct) << "," << fmt_g(off_samples) << ","
            << fmt_g(entry.final_mean_pge) << "," << (entry.success ? 1 : 0)
            << "," << entry.first_success_step << "\n";
        result.sweep.push_back(std::move(entry));
      }
      rec.artifacts.push_back("sweep_summary.csv");
    });
  }

  result.manifest = runner.manifest;
  return result;
}

std::vector<SweepEntry> run_precision_sweep(const KeyValueConfig& recipe,
                                            const fs::path& output_dir,
                                            std::uint64_t seed_override,
                                            bool has_seed_override) {
  if (!recipe.has("sweep.offsets_pct"))
    throw ConfigError("precision sweep requires sweep.offsets_pct");
  auto result =
      run_experiment(recipe, output_dir, seed_override, has_seed_override);
  return std::move(result.sweep);
}

void write_pge_csv(const AttackReport& report, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write: " + path.string());
  out << "step,byte,mean_pge\n";
  for (std::size_t si = 0; si < report.traces_used.size(); ++si)
    for (int b = 0; b < 16; ++b)
      out << report.traces_used[si] << "," << b << ","
          << fmt_g(report.mean_pge[si][b]) << "\n";
}

void write_pge_grid(const AttackReport& report, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write: " + path.string());

  // bytes sorted best-to-worst at the final step, one row each; plot with
  // gnuplot:  plot 'pge_grid.txt' matrix with image
  std::array<int, 16> order;
  std::iota(order.begin(), order.end(), 0);
  const auto& final_row = report.mean_pge.back();
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return final_row[a] < final_row[b]; });

  out << "# mean PGE per key byte; rows sorted best-to-worst at the final step\n";
  out << "# columns: segments used =";
  for (auto s : report.traces_used) out << " " << s;
  out << "\n";
  for (int r = 0; r < 16; ++r) {
    const int b = order[r];
    for (std::size_t si = 0; si < report.traces_used.size(); ++si)
      out << (si ? " " : "") << fmt_g(report.mean_pge[si][b]);
    out << "\n";
  }
}

std::string report_run(const fs::path& run_dir) {
  const auto manifest = load_manifest(run_dir / "manifest.json");
  std::ostringstream os;
  os << "run: " << manifest.title << "\n";
  os << "tool " << manifest.tool_version << ", seed " << manifest.seed
     << ", config " << manifest.config_hash << "\n\n";
  os << "stage            status   wall_ms\n";
  bool failed = false;
  std::string failed_stage;
  for (const auto& s : manifest.stages) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-16s %-8s %10.1f\n", s.name.c_str(),
                  s.status.c_str(), s.wall_ms);
    os << line;
    if (s.status != "ok" && !failed) {
      failed = true;
      failed_stage = s.name;
    }
  }
  bool any_warning = false;
  for (const auto& s : manifest.stages)
    for (const auto& w : s.warnings) {
      if (!any_warning) os << "\nwarnings:\n";
      any_warning = true;
      os << "  " << s.name << ": " << w << "\n";
    }
  if (failed) os << "\nrun FAILED at stage: " << failed_stage << "\n";

  std::ifstream sj(run_dir / "summary.json");
  if (sj) {
    nlohmann::json j;
    try {
      sj >> j;
      os << "\nattack summary (l_cp refined " << j.value("l_cp_refined", 0.0)
         << ", true " << j.value("l_cp_true", 0.0) << "):\n";
      if (j.contains("branches"))
        for (const auto& [name, b] : j["branches"].items()) {
          os << "  " << name << ": first success at "
             << b.value("first_success_step", -1L) << " segments, final mean PGE "
             << b.value("final_mean_pge", 0.0)
             << (b.value("success_at_final", false) ? " (success)" : " (FAIL)")
             << "\n";
        }
    } catch (const nlohmann::json::exception&) {
      os << "\n(summary.json unreadable)\n";
    }
  }
  return os.str();
}

std::string report_compare(const fs::path& run_a, const fs::path& run_b) {
  const auto ma = load_manifest(run_a / "manifest.json");
  const auto mb = load_manifest(run_b / "manifest.json");
  std::ostringstream os;
  os << "timing comparison: " << run_a.string() << " vs " << run_b.string()
     << "\n\n";
  os << "stage            a_ms       b_ms       ratio\n";
  for (const auto& sa : ma.stages) {
    const StageRecord* sb = nullptr;
    for (const auto& s : mb.stages)
      if (s.name == sa.name) {
        sb = &s;
        break;
      }
    char line[160];
    if (sb && sa.wall_ms > 0.0) {
      std::snprintf(line, sizeof(line), "%-16s %10.1f %10.1f %9.3f\n",
                    sa.name.c_str(), sa.wall_ms, sb->wall_ms,
                    sb->wall_ms / sa.wall_ms);
    } else {
      std::snprintf(line, sizeof(line), "%-16s %10.1f %10s %9s\n",
                    sa.name.c_str(), sa.wall_ms, sb ? "-" : "missing", "-");
    }
    os << line;
  }
  return os.str();
}

}  // namespace vtrig
