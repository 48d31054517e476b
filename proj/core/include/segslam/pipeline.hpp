#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "segslam/config.hpp"
#include "segslam/dataset.hpp"
#include "segslam/evaluation.hpp"
#include "segslam/landmark_map.hpp"
#include "segslam/simulator.hpp"
#include "segslam/tracking.hpp"

namespace segslam {

enum class PipelineMode {
  kTrackOnly,   // segmentation gating without refinement
  kFull,        // gating plus pose-guided refinement
  kSecondPass,  // per-frame relocalization against a prior map
  kBaseline,    // every feature is treated as background
};

std::string to_string(PipelineMode mode);
/// Accepts track_only, full, second_pass, baseline. Throws kInvalidArgument.
PipelineMode parse_mode(const std::string& s);

enum class MapSource { kLongTerm, kTracking };

std::string to_string(MapSource src);
MapSource parse_map_source(const std::string& s);

struct CorruptionConfig {
  bool enabled = true;
  double drop_rate = 0.2;
  double dilate_rate = 0.1;
  std::uint64_t seed = 1;
};

struct PipelineConfig {
  std::filesystem::path dataset;
  std::filesystem::path scene;     // experiment input when no dataset is given
  std::filesystem::path map_path;  // prior map for kSecondPass
  std::filesystem::path output;
  TrackingConfig tracking;
  SimilarityWeights weights;
  CorruptionConfig corruption;
  int keyframe_interval = 5;
  int runs = 1;
  std::uint64_t seed = 1;  // per-run noise seeds derive from this
  PipelineMode mode = PipelineMode::kFull;
  MapSource second_pass_map = MapSource::kLongTerm;

  /// Throws kInvalidArgument (bad values) or kIo (missing paths).
  void validate() const;
};

/// Reads keys from a key = value file on top of `defaults`.
PipelineConfig pipeline_config_from(const KeyValueConfig& cfg, const PipelineConfig& defaults = {});
void write_pipeline_config(std::ostream& os, const PipelineConfig& cfg);

/// Wall-clock milliseconds summed over the frames of one run.
struct StageTimings {
  double load_ms = 0.0;
  double coarse_ms = 0.0;
  double refine_ms = 0.0;
  double classify_ms = 0.0;
  double fine_ms = 0.0;
  double mapping_ms = 0.0;
  int frames = 0;
};

/// Observer for tests: called before each refinement with the current
/// frame index and the frame indices of the segmentation and pose it reads.
using RefineTrace = std::function<void(int frame, int seg_frame, int pose_frame)>;

struct PipelineResult {
  Trajectory trajectory;  // tracked frames only
  std::vector<int> lost_frames;
  std::vector<FrameSegmentation> segmentation;         // final, per frame
  std::vector<FrameSegmentation> coarse_segmentation;  // segmenter input, per frame
  TrackingMap tracking_map;
  LongTermMap long_term_map;
  StageTimings timings;
};

/// Runs the per-frame loop over `src`. `prior` is required in kSecondPass.
PipelineResult run_pipeline(const FrameSource& src, const PipelineConfig& cfg, const MapPointStore* prior = nullptr,
                            const RefineTrace& trace = {});

/// Loads cfg.dataset (and cfg.map_path in kSecondPass) and runs it.
PipelineResult run_pipeline(const PipelineConfig& cfg);

struct RunSummary {
  std::uint64_t noise_seed = 0;
  double ate_rmse = 0.0;
  std::size_t tracked_frames = 0;
  std::vector<int> lost_frames;
  SegReport seg;
  SegReport coarse_seg;
  std::size_t tracking_map_points = 0;
  std::size_t long_term_map_points = 0;
  std::size_t long_term_impure = 0;
  StageTimings timings;
};

struct ExperimentReport {
  PipelineMode mode = PipelineMode::kFull;
  int runs = 0;
  AteReport ate;
  std::vector<RunSummary> run_summaries;
  /// Per-run SegReport aggregates: median of mIoU and mAP50 over runs.
  double miou_median = 0.0;
  double map50_median = 0.0;
  double coarse_miou_median = 0.0;
  double coarse_map50_median = 0.0;
};

/// Scene-driven experiment: each run regenerates the scene with noise seed
/// mix_seed(cfg.seed, run) and runs the pipeline. In kSecondPass the first
/// pass runs in kFull mode, and the second pass relocalizes against the
/// map selected by cfg.second_pass_map.
ExperimentReport run_experiment(const PipelineConfig& cfg, const SceneSpec& scene);

/// Dataset-driven experiment (loads cfg.scene instead when cfg.dataset is
/// empty). Runs over a fixed dataset differ only through their corruption
/// seeds.
ExperimentReport run_experiment(const PipelineConfig& cfg);

/// Human-readable summary. Contains no timings, so it is deterministic.
void write_report_text(std::ostream& os, const ExperimentReport& rep);
/// One `key = value` per line, same determinism guarantee.
void write_report_kv(std::ostream& os, const ExperimentReport& rep);
/// `frame,error_m` rows for the first run.
void write_per_frame_csv(std::ostream& os, const ExperimentReport& rep);
/// Per-run, per-stage milliseconds.
void write_timings(std::ostream& os, const ExperimentReport& rep);

/// Writes report.txt, report.kv, per_frame_errors.csv and timings.txt.
void write_reports(const std::filesystem::path& dir, const ExperimentReport& rep);

}  // namespace segslam
