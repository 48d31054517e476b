#include "segslam/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "segslam/error.hpp"
#include "segslam/mapping.hpp"
#include "segslam/random.hpp"
#include "segslam/scene_io.hpp"

namespace fs = std::filesystem;

namespace segslam {

std::string to_string(PipelineMode mode) {
  switch (mode) {
    case PipelineMode::kTrackOnly: return "track_only";
    case PipelineMode::kFull: return "full";
    case PipelineMode::kSecondPass: return "second_pass";
    case PipelineMode::kBaseline: return "baseline";
  }
  return "full";
}

PipelineMode parse_mode(const std::string& s) {
  if (s == "track_only") return PipelineMode::kTrackOnly;
  if (s == "full") return PipelineMode::kFull;
  if (s == "second_pass") return PipelineMode::kSecondPass;
  if (s == "baseline") return PipelineMode::kBaseline;
  throw Error(ErrorCode::kInvalidArgument, "unknown mode '" + s + "'");
}

std::string to_string(MapSource src) { return src == MapSource::kLongTerm ? "long_term" : "tracking"; }

MapSource parse_map_source(const std::string& s) {
  if (s == "long_term") return MapSource::kLongTerm;
  if (s == "tracking") return MapSource::kTracking;
  throw Error(ErrorCode::kInvalidArgument, "unknown map source '" + s + "'");
}

void PipelineConfig::validate() const {
  tracking.validate();
  weights.validate();
  if (runs < 1) throw Error(ErrorCode::kInvalidArgument, "runs must be at least 1");
  if (keyframe_interval < 1) throw Error(ErrorCode::kInvalidArgument, "keyframe_interval must be at least 1");
  if (!(corruption.drop_rate >= 0 && corruption.drop_rate <= 1) ||
      !(corruption.dilate_rate >= 0 && corruption.dilate_rate <= 1)) {
    throw Error(ErrorCode::kInvalidArgument, "corruption rates must lie in [0, 1]");
  }
  for (const fs::path* p : {&dataset, &scene, &map_path}) {
    if (!p->empty() && !fs::exists(*p)) throw Error(ErrorCode::kIo, p->string() + " does not exist");
  }
}

PipelineConfig pipeline_config_from(const KeyValueConfig& kv, const PipelineConfig& defaults) {
  PipelineConfig cfg = defaults;
  if (kv.has("dataset")) cfg.dataset = kv.get_string("dataset", "");
  if (kv.has("scene")) cfg.scene = kv.get_string("scene", "");
  if (kv.has("map")) cfg.map_path = kv.get_string("map", "");
  if (kv.has("output")) cfg.output = kv.get_string("output", "");
  cfg.tracking = tracking_config_from(kv, cfg.tracking);
  cfg.weights.w1 = kv.get_double("w1", cfg.weights.w1);
  cfg.weights.w2 = kv.get_double("w2", cfg.weights.w2);
  cfg.weights.match_threshold = kv.get_double("match_threshold", cfg.weights.match_threshold);
  cfg.weights.replace_margin = kv.get_double("replace_margin", cfg.weights.replace_margin);
  cfg.corruption.enabled = kv.get_bool("corrupt", cfg.corruption.enabled);
  cfg.corruption.drop_rate = kv.get_double("drop_rate", cfg.corruption.drop_rate);
  cfg.corruption.dilate_rate = kv.get_double("dilate_rate", cfg.corruption.dilate_rate);
  cfg.corruption.seed = static_cast<std::uint64_t>(kv.get_int("corruption_seed", static_cast<int>(cfg.corruption.seed)));
  cfg.keyframe_interval = kv.get_int("keyframe_interval", cfg.keyframe_interval);
  cfg.runs = kv.get_int("runs", cfg.runs);
  cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<int>(cfg.seed)));
  if (kv.has("mode")) cfg.mode = parse_mode(kv.get_string("mode", ""));
  if (kv.has("map_source")) cfg.second_pass_map = parse_map_source(kv.get_string("map_source", ""));
  return cfg;
}

void write_pipeline_config(std::ostream& os, const PipelineConfig& cfg) {
  os << std::setprecision(17);
  if (!cfg.dataset.empty()) os << "dataset = " << cfg.dataset.string() << "\n";
  if (!cfg.scene.empty()) os << "scene = " << cfg.scene.string() << "\n";
  if (!cfg.map_path.empty()) os << "map = " << cfg.map_path.string() << "\n";
  if (!cfg.output.empty()) os << "output = " << cfg.output.string() << "\n";
  os << "mode = " << to_string(cfg.mode) << "\n"
     << "map_source = " << to_string(cfg.second_pass_map) << "\n"
     << "runs = " << cfg.runs << "\n"
     << "seed = " << cfg.seed << "\n"
     << "keyframe_interval = " << cfg.keyframe_interval << "\n"
     << "corrupt = " << (cfg.corruption.enabled ? "true" : "false") << "\n"
     << "drop_rate = " << cfg.corruption.drop_rate << "\n"
     << "dilate_rate = " << cfg.corruption.dilate_rate << "\n"
     << "corruption_seed = " << cfg.corruption.seed << "\n"
     << "w1 = " << cfg.weights.w1 << "\n"
     << "w2 = " << cfg.weights.w2 << "\n"
     << "match_threshold = " << cfg.weights.match_threshold << "\n"
     << "replace_margin = " << cfg.weights.replace_margin << "\n";
  write_tracking_config(os, cfg.tracking);
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

FrameSegmentation moveable_only(const FrameSegmentation& seg) {
  FrameSegmentation out(seg.frame_index, seg.width, seg.height);
  for (const auto& r : seg.regions) {
    if (r.moveable) out.regions.push_back(r);
  }
  return out;
}

std::vector<std::size_t> depth_features(const FrameObservation& obs) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < obs.features.size(); ++i) {
    if (obs.features[i].has_depth()) out.push_back(i);
  }
  return out;
}

ClassifiedPoints all_background(const FrameObservation& obs) {
  ClassifiedPoints out;
  out.background = depth_features(obs);
  return out;
}

bool is_degenerate(const Error& e) { return e.code() == ErrorCode::kDegenerate; }

}  // namespace

PipelineResult run_pipeline(const FrameSource& src, const PipelineConfig& cfg, const MapPointStore* prior,
                            const RefineTrace& trace) {
  cfg.tracking.validate();
  cfg.weights.validate();
  if (cfg.keyframe_interval < 1) throw Error(ErrorCode::kInvalidArgument, "keyframe_interval must be at least 1");
  if (cfg.mode == PipelineMode::kSecondPass && !prior) {
    throw Error(ErrorCode::kInvalidArgument, "second-pass mode needs a prior map");
  }
  const CameraModel& cam = src.camera();
  const ClassTable& classes = src.classes();
  const TrackingConfig& tc = cfg.tracking;

  PipelineResult res;
  std::size_t ltm_synced = 0;
  std::optional<Pose> last_pose;
  std::optional<Pose> before_last_pose;
  int last_pose_frame = -1;
  std::optional<FrameSegmentation> prev_seg;
  DepthGrid prev_depth;
  bool need_reinit = false;

  for (std::size_t i = 0; i < src.size(); ++i) {
    auto t0 = Clock::now();
    FrameObservation obs = src.observation(i);
    const int frame = obs.frame_index;
    FrameSegmentation coarse = src.segmentation(i);
    if (cfg.corruption.enabled) {
      coarse = corrupt(coarse, cfg.corruption.drop_rate, cfg.corruption.dilate_rate,
                       mix_seed(cfg.corruption.seed, static_cast<std::uint64_t>(frame)));
    }
    if (!classes.empty()) coarse = shortlist_moveable(coarse, classes);
    res.coarse_segmentation.push_back(coarse);
    res.timings.load_ms += elapsed_ms(t0);
    ++res.timings.frames;

    auto mark_lost = [&] {
      res.lost_frames.push_back(frame);
      res.segmentation.push_back(coarse);
      need_reinit = true;
      before_last_pose.reset();
    };

    try {
      if (cfg.mode == PipelineMode::kSecondPass) {
        t0 = Clock::now();
        const PoseEstimate est = relocalize(*prior, obs, cam, tc, last_pose);
        res.timings.coarse_ms += elapsed_ms(t0);
        res.trajectory.poses.push_back({obs.timestamp, est.pose});
        res.segmentation.push_back(coarse);
        last_pose = est.pose;
        continue;
      }

      if (!last_pose) {
        // World anchor: the first frame defines the map frame.
        t0 = Clock::now();
        const Pose pose = Pose::identity();
        ClassifiedPoints points;
        if (cfg.mode == PipelineMode::kBaseline) {
          points = all_background(obs);
        } else {
          points = classify_points(obs, moveable_only(coarse));
          for (const auto& [id, idx] : points.per_instance) points.motion_state[id] = MotionState::kStatic;
        }
        res.timings.classify_ms += elapsed_ms(t0);
        t0 = Clock::now();
        update_tracking_map(res.tracking_map, obs, points, pose, cam);
        update_long_term_map(res.long_term_map, res.tracking_map, ltm_synced);
        ltm_synced = res.tracking_map.store.size();
        res.timings.mapping_ms += elapsed_ms(t0);
        res.trajectory.poses.push_back({obs.timestamp, pose});
        res.segmentation.push_back(coarse);
        last_pose = pose;
        last_pose_frame = frame;
        prev_seg = std::move(coarse);
        prev_depth = std::move(obs.depth);
        continue;
      }

      t0 = Clock::now();
      Pose coarse_pose;
      if (need_reinit) {
        const MapPointStore& reloc_map =
            res.long_term_map.size() >= 6 ? res.long_term_map.store() : res.tracking_map.store;
        coarse_pose = relocalize(reloc_map, obs, cam, tc, last_pose).pose;
      } else {
        const Pose predicted =
            before_last_pose ? compose(relative_pose(*before_last_pose, *last_pose), *last_pose) : *last_pose;
        auto matches = associate(obs, depth_features(obs), res.tracking_map.store, cam, predicted,
                                 tc.search_radius, tc);
        std::vector<FeatureMatch> anchored;
        for (const auto& m : matches) {
          if (res.tracking_map.store[m.map_point].provenance == Provenance::kBackground) anchored.push_back(m);
        }
        if (anchored.size() >= 6) matches = std::move(anchored);
        const auto corr = to_correspondences(obs, matches, res.tracking_map.store);
        coarse_pose = estimate_pose_gated(corr, cam, predicted, tc).pose;
      }
      res.timings.coarse_ms += elapsed_ms(t0);

      t0 = Clock::now();
      FrameSegmentation seg = coarse;
      if (cfg.mode == PipelineMode::kFull) {
        if (trace) trace(frame, prev_seg->frame_index, last_pose_frame);
        seg = refine(*prev_seg, prev_depth, coarse, relative_pose(*last_pose, coarse_pose), cam, cfg.weights);
        if (!classes.empty()) seg = shortlist_moveable(seg, classes);
      }
      res.timings.refine_ms += elapsed_ms(t0);

      t0 = Clock::now();
      ClassifiedPoints points;
      if (cfg.mode == PipelineMode::kBaseline) {
        points = all_background(obs);
      } else {
        points = judge_motion(classify_points(obs, moveable_only(seg)), obs, coarse_pose, res.tracking_map, cam, tc);
      }
      res.timings.classify_ms += elapsed_ms(t0);

      t0 = Clock::now();
      const Pose fine = fine_track(obs, points, res.tracking_map, cam, coarse_pose, tc);
      res.timings.fine_ms += elapsed_ms(t0);

      t0 = Clock::now();
      if (i % static_cast<std::size_t>(cfg.keyframe_interval) == 0) {
        update_tracking_map(res.tracking_map, obs, points, fine, cam);
        update_long_term_map(res.long_term_map, res.tracking_map, ltm_synced);
        ltm_synced = res.tracking_map.store.size();
      }
      res.timings.mapping_ms += elapsed_ms(t0);

      res.trajectory.poses.push_back({obs.timestamp, fine});
      res.segmentation.push_back(seg);
      before_last_pose = need_reinit ? std::nullopt : last_pose;
      need_reinit = false;
      last_pose = fine;
      last_pose_frame = frame;
      prev_seg = std::move(seg);
      prev_depth = std::move(obs.depth);
    } catch (const Error& e) {
      if (!is_degenerate(e)) {
        throw Error(e.code(), "frame " + std::to_string(frame) + ": " + e.what());
      }
      mark_lost();
    }
  }
  return res;
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.dataset.empty()) throw Error(ErrorCode::kInvalidArgument, "no dataset given");
  const DatasetSource src(cfg.dataset);
  if (cfg.mode == PipelineMode::kSecondPass) {
    if (cfg.map_path.empty()) throw Error(ErrorCode::kInvalidArgument, "second-pass mode needs a map file");
    const MapPointStore prior = load_map(cfg.map_path);
    return run_pipeline(src, cfg, &prior);
  }
  return run_pipeline(src, cfg);
}

namespace {

std::vector<FrameSegmentation> reference_segmentations(const FrameSource& src) {
  std::vector<FrameSegmentation> out;
  out.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out.push_back(src.segmentation(i));
  return out;
}

RunSummary summarize(const PipelineResult& res, const FrameSource& src, std::uint64_t seed) {
  RunSummary s;
  s.noise_seed = seed;
  s.ate_rmse = ate(res.trajectory, src.groundtruth()).rmse;
  s.tracked_frames = res.trajectory.size();
  s.lost_frames = res.lost_frames;
  const auto gt = reference_segmentations(src);
  s.seg = evaluate_segmentation(res.segmentation, gt);
  s.coarse_seg = evaluate_segmentation(res.coarse_segmentation, gt);
  s.tracking_map_points = res.tracking_map.size();
  s.long_term_map_points = res.long_term_map.size();
  s.long_term_impure = res.long_term_map.impurity_count();
  s.timings = res.timings;
  return s;
}

void finish_report(ExperimentReport& rep, const std::vector<Trajectory>& runs, const Trajectory& gt) {
  rep.ate = ate(std::span<const Trajectory>(runs), gt);
  std::vector<double> miou, map, cmiou, cmap;
  for (const auto& s : rep.run_summaries) {
    miou.push_back(s.seg.miou);
    map.push_back(s.seg.map50);
    cmiou.push_back(s.coarse_seg.miou);
    cmap.push_back(s.coarse_seg.map50);
  }
  rep.miou_median = median_of(miou);
  rep.map50_median = median_of(map);
  rep.coarse_miou_median = median_of(cmiou);
  rep.coarse_map50_median = median_of(cmap);
}

}  // namespace

ExperimentReport run_experiment(const PipelineConfig& cfg, const SceneSpec& scene) {
  if (cfg.runs < 1) throw Error(ErrorCode::kInvalidArgument, "runs must be at least 1");
  ExperimentReport rep;
  rep.mode = cfg.mode;
  rep.runs = cfg.runs;
  std::vector<Trajectory> trajectories;
  Trajectory gt;
  for (int r = 0; r < cfg.runs; ++r) {
    SceneSpec spec = scene;
    spec.noise_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(r));
    const GroundTruthBundle bundle = generate(spec);
    const BundleSource first(bundle);
    if (cfg.mode == PipelineMode::kSecondPass) {
      PipelineConfig first_cfg = cfg;
      first_cfg.mode = PipelineMode::kFull;
      const PipelineResult mapping_run = run_pipeline(first, first_cfg);
      const MapPointStore& prior = cfg.second_pass_map == MapSource::kLongTerm ? mapping_run.long_term_map.store()
                                                                                : mapping_run.tracking_map.store;
      const GroundTruthBundle bundle2 = second_pass(spec);
      const BundleSource second(bundle2);
      const PipelineResult res = run_pipeline(second, cfg, &prior);
      RunSummary s = summarize(res, second, spec.noise_seed);
      s.tracking_map_points = mapping_run.tracking_map.size();
      s.long_term_map_points = mapping_run.long_term_map.size();
      s.long_term_impure = mapping_run.long_term_map.impurity_count();
      rep.run_summaries.push_back(std::move(s));
      trajectories.push_back(res.trajectory);
      if (r == 0) gt = second.groundtruth();
    } else {
      const PipelineResult res = run_pipeline(first, cfg);
      rep.run_summaries.push_back(summarize(res, first, spec.noise_seed));
      trajectories.push_back(res.trajectory);
      if (r == 0) gt = first.groundtruth();
    }
  }
  finish_report(rep, trajectories, gt);
  return rep;
}

ExperimentReport run_experiment(const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.dataset.empty()) {
    if (cfg.scene.empty()) throw Error(ErrorCode::kInvalidArgument, "experiment needs a dataset or a scene");
    return run_experiment(cfg, load_scene(cfg.scene));
  }
  const DatasetSource src(cfg.dataset);
  std::optional<MapPointStore> prior;
  if (cfg.mode == PipelineMode::kSecondPass) {
    if (cfg.map_path.empty()) throw Error(ErrorCode::kInvalidArgument, "second-pass mode needs a map file");
    prior = load_map(cfg.map_path);
  }
  ExperimentReport rep;
  rep.mode = cfg.mode;
  rep.runs = cfg.runs;
  std::vector<Trajectory> trajectories;
  for (int r = 0; r < cfg.runs; ++r) {
    PipelineConfig run_cfg = cfg;
    run_cfg.corruption.seed = mix_seed(cfg.corruption.seed, static_cast<std::uint64_t>(r));
    const PipelineResult res = run_pipeline(src, run_cfg, prior ? &*prior : nullptr);
    rep.run_summaries.push_back(summarize(res, src, run_cfg.corruption.seed));
    trajectories.push_back(res.trajectory);
  }
  finish_report(rep, trajectories, src.groundtruth());
  return rep;
}

namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  return buf;
}

}  // namespace

void write_report_text(std::ostream& os, const ExperimentReport& rep) {
  os << "mode " << to_string(rep.mode) << ", " << rep.runs << " run(s)\n\n";
  os << "ATE rmse (median run) " << fmt(rep.ate.rmse) << " m\n"
     << "  median " << fmt(rep.ate.median) << "  min " << fmt(rep.ate.min) << "  max " << fmt(rep.ate.max) << "\n\n";
  os << "segmentation (median over runs)\n"
     << "  refined  mIoU " << fmt(rep.miou_median) << "  mAP50 " << fmt(rep.map50_median) << "\n"
     << "  coarse   mIoU " << fmt(rep.coarse_miou_median) << "  mAP50 " << fmt(rep.coarse_map50_median) << "\n\n";
  os << "run  seed                  ate_m        tracked lost  miou         map50        tm_pts ltm_pts impure\n";
  for (std::size_t r = 0; r < rep.run_summaries.size(); ++r) {
    const auto& s = rep.run_summaries[r];
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-4zu %-21llu %-12s %-7zu %-5zu %-12s %-12s %-6zu %-7zu %zu\n", r,
                  static_cast<unsigned long long>(s.noise_seed), fmt(s.ate_rmse).c_str(), s.tracked_frames,
                  s.lost_frames.size(), fmt(s.seg.miou).c_str(), fmt(s.seg.map50).c_str(), s.tracking_map_points,
                  s.long_term_map_points, s.long_term_impure);
    os << buf;
  }
}

void write_report_kv(std::ostream& os, const ExperimentReport& rep) {
  os << "mode = " << to_string(rep.mode) << "\n"
     << "runs = " << rep.runs << "\n"
     << "ate_rmse = " << fmt(rep.ate.rmse) << "\n"
     << "ate_median = " << fmt(rep.ate.median) << "\n"
     << "ate_min = " << fmt(rep.ate.min) << "\n"
     << "ate_max = " << fmt(rep.ate.max) << "\n"
     << "miou = " << fmt(rep.miou_median) << "\n"
     << "map50 = " << fmt(rep.map50_median) << "\n"
     << "coarse_miou = " << fmt(rep.coarse_miou_median) << "\n"
     << "coarse_map50 = " << fmt(rep.coarse_map50_median) << "\n";
  for (std::size_t r = 0; r < rep.run_summaries.size(); ++r) {
    const auto& s = rep.run_summaries[r];
    const std::string p = "run" + std::to_string(r) + ".";
    os << p << "seed = " << s.noise_seed << "\n"
       << p << "ate_rmse = " << fmt(s.ate_rmse) << "\n"
       << p << "tracked_frames = " << s.tracked_frames << "\n"
       << p << "lost_frames = " << s.lost_frames.size() << "\n"
       << p << "miou = " << fmt(s.seg.miou) << "\n"
       << p << "map50 = " << fmt(s.seg.map50) << "\n"
       << p << "coarse_miou = " << fmt(s.coarse_seg.miou) << "\n"
       << p << "coarse_map50 = " << fmt(s.coarse_seg.map50) << "\n"
       << p << "tracking_map_points = " << s.tracking_map_points << "\n"
       << p << "long_term_map_points = " << s.long_term_map_points << "\n"
       << p << "long_term_impure = " << s.long_term_impure << "\n";
  }
}

void write_per_frame_csv(std::ostream& os, const ExperimentReport& rep) {
  os << "frame,error_m\n";
  for (std::size_t i = 0; i < rep.ate.per_frame_errors.size(); ++i) {
    os << i << ',' << fmt(rep.ate.per_frame_errors[i]) << '\n';
  }
}

void write_timings(std::ostream& os, const ExperimentReport& rep) {
  os << "run,frames,load_ms,coarse_ms,refine_ms,classify_ms,fine_ms,mapping_ms\n";
  for (std::size_t r = 0; r < rep.run_summaries.size(); ++r) {
    const StageTimings& t = rep.run_summaries[r].timings;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%zu,%d,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f\n", r, t.frames, t.load_ms, t.coarse_ms,
                  t.refine_ms, t.classify_ms, t.fine_ms, t.mapping_ms);
    os << buf;
  }
}

void write_reports(const fs::path& dir, const ExperimentReport& rep) {
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("report.txt");
    write_report_text(out, rep);
  }
  {
    auto out = open("report.kv");
    write_report_kv(out, rep);
  }
  {
    auto out = open("per_frame_errors.csv");
    write_per_frame_csv(out, rep);
  }
  {
    auto out = open("timings.txt");
    write_timings(out, rep);
  }
}

}  // namespace segslam
