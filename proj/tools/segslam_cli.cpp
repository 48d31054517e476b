#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "segslam/config.hpp"
#include "segslam/dataset.hpp"
#include "segslam/error.hpp"
#include "segslam/evaluation.hpp"
#include "segslam/mapping.hpp"
#include "segslam/pipeline.hpp"
#include "segslam/scene_io.hpp"
#include "segslam/segmentation_io.hpp"
#include "segslam/simulator.hpp"

namespace fs = std::filesystem;
using namespace segslam;

namespace {

// Flag name -> config key. Every PipelineConfig field that can be set from a
// config file can also be set on the command line.
const std::vector<std::pair<std::string, std::string>> kPipelineFlags = {
    {"--mode", "mode"},
    {"--map-source", "map_source"},
    {"--runs", "runs"},
    {"--seed", "seed"},
    {"--keyframe-interval", "keyframe_interval"},
    {"--corrupt", "corrupt"},
    {"--drop-rate", "drop_rate"},
    {"--dilate-rate", "dilate_rate"},
    {"--corruption-seed", "corruption_seed"},
    {"--w1", "w1"},
    {"--w2", "w2"},
    {"--match-threshold", "match_threshold"},
    {"--replace-margin", "replace_margin"},
    {"--match-dist-3d", "match_dist_3d"},
    {"--moving-fraction", "moving_fraction"},
    {"--huber-delta", "huber_delta"},
    {"--max-iterations", "max_iterations"},
    {"--convergence-tol", "convergence_tol"},
    {"--pixel-match-radius", "pixel_match_radius"},
    {"--search-radius", "search_radius"},
    {"--max-descriptor-distance", "max_descriptor_distance"},
    {"--outlier-gate-px", "outlier_gate_px"},
    {"--min-support-fraction", "min_support_fraction"},
};

struct PipelineArgs {
  std::string config_file;
  std::string dataset;
  std::string scene;
  std::string map;
  std::string output;
  std::map<std::string, std::string> flags;
};

void add_pipeline_options(CLI::App* app, PipelineArgs& args) {
  app->add_option("-c,--config", args.config_file, "key = value settings file")->check(CLI::ExistingFile);
  for (const auto& [flag, key] : kPipelineFlags) app->add_option(flag, args.flags[key]);
}

// defaults < config file < flags. Relative paths in a config file are
// taken relative to the file.
PipelineConfig resolve(const CLI::App* app, const PipelineArgs& args) {
  KeyValueConfig kv;
  if (!args.config_file.empty()) {
    kv = KeyValueConfig::load(args.config_file);
    const fs::path base = fs::path(args.config_file).parent_path();
    for (const char* key : {"dataset", "scene", "map", "output"}) {
      const auto v = kv.get(key);
      if (v && !v->empty() && fs::path(*v).is_relative()) kv.set(key, (base / *v).lexically_normal().string());
    }
  }
  const std::pair<const char*, const std::string*> paths[] = {
      {"dataset", &args.dataset}, {"scene", &args.scene}, {"map", &args.map}, {"output", &args.output}};
  for (const auto& [key, value] : paths) {
    if (!value->empty()) kv.set(key, *value);
  }
  for (const auto& [flag, key] : kPipelineFlags) {
    if (app->count(flag) > 0) kv.set(key, args.flags.at(key));
  }
  PipelineConfig cfg = pipeline_config_from(kv);
  cfg.validate();
  return cfg;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return os;
}

void write_frame_list(const fs::path& path, const std::vector<int>& frames) {
  auto os = open_out(path);
  for (int f : frames) os << f << "\n";
}

void write_masks(const fs::path& dir, const std::vector<FrameSegmentation>& segs) {
  fs::create_directories(dir);
  for (const auto& s : segs) {
    const std::string stem = frame_stem(s.frame_index);
    write_segmentation(dir / (stem + ".pgm"), dir / (stem + ".txt"), s);
  }
}

std::vector<FrameSegmentation> read_masks(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIo, dir.string() + " is not a directory");
  std::vector<fs::path> pgms;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".pgm") pgms.push_back(e.path());
  }
  std::sort(pgms.begin(), pgms.end());
  std::vector<FrameSegmentation> out;
  for (const auto& p : pgms) {
    fs::path sidecar = p;
    sidecar.replace_extension(".txt");
    out.push_back(read_segmentation(p, sidecar, std::stoi(p.stem().string())));
  }
  return out;
}

// Keeps only frames present in both sequences, in frame order.
void intersect_frames(std::vector<FrameSegmentation>& pred, std::vector<FrameSegmentation>& gt) {
  std::map<int, FrameSegmentation> by_frame;
  for (auto& g : gt) by_frame.emplace(g.frame_index, std::move(g));
  std::vector<FrameSegmentation> p2, g2;
  for (auto& p : pred) {
    auto it = by_frame.find(p.frame_index);
    if (it == by_frame.end()) continue;
    g2.push_back(std::move(it->second));
    p2.push_back(std::move(p));
  }
  pred = std::move(p2);
  gt = std::move(g2);
}

fs::path require_output(const PipelineConfig& cfg) {
  if (cfg.output.empty()) throw Error(ErrorCode::kInvalidArgument, "an output directory is required (--out)");
  fs::create_directories(cfg.output);
  return cfg.output;
}

void write_track_outputs(const fs::path& out, const PipelineResult& res, const PipelineConfig& cfg) {
  write_tum_trajectory(out / "trajectory.txt", res.trajectory);
  write_frame_list(out / "lost_frames.txt", res.lost_frames);
  {
    auto os = open_out(out / "config.used");
    write_pipeline_config(os, cfg);
  }
  const auto& t = res.timings;
  auto os = open_out(out / "timings.txt");
  os << "frames = " << t.frames << "\nload_ms = " << t.load_ms << "\ncoarse_ms = " << t.coarse_ms
     << "\nrefine_ms = " << t.refine_ms << "\nclassify_ms = " << t.classify_ms << "\nfine_ms = " << t.fine_ms
     << "\nmapping_ms = " << t.mapping_ms << "\n";
}

int cmd_simulate(const std::string& scene_path, const std::string& out, bool second, std::uint64_t noise_seed,
                 bool seed_set) {
  SceneSpec spec = load_scene(scene_path);
  if (seed_set) spec.noise_seed = noise_seed;
  const GroundTruthBundle bundle = second ? second_pass(spec) : generate(spec);
  write_dataset(out, bundle, &spec);
  std::cout << "wrote " << bundle.n_frames() << " frames to " << out << "\n";
  return 0;
}

int cmd_track(const PipelineConfig& cfg) {
  if (cfg.dataset.empty()) throw Error(ErrorCode::kInvalidArgument, "track needs --dataset");
  const fs::path out = require_output(cfg);
  const PipelineResult res = run_pipeline(cfg);
  write_track_outputs(out, res, cfg);
  save_map(out / "tracking_map.map", res.tracking_map.store);
  save_map(out / "long_term_map.map", res.long_term_map);
  write_masks(out / "masks", res.segmentation);
  std::cout << "tracked " << res.trajectory.size() << " frames, lost " << res.lost_frames.size() << "\n";
  return 0;
}

int cmd_relocalize(PipelineConfig cfg) {
  if (cfg.dataset.empty() || cfg.map_path.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "relocalize needs --dataset and --map");
  }
  cfg.mode = PipelineMode::kSecondPass;
  const fs::path out = require_output(cfg);
  const PipelineResult res = run_pipeline(cfg);
  write_track_outputs(out, res, cfg);
  std::cout << "relocalized " << res.trajectory.size() << " frames, lost " << res.lost_frames.size() << "\n";
  return 0;
}

struct EvalArgs {
  std::string gt_traj, est_traj, gt_masks, pred_masks, out;
};

int cmd_evaluate(const EvalArgs& a) {
  if (a.est_traj.empty() && a.pred_masks.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "nothing to evaluate: give --est and/or --pred-masks");
  }
  std::ostringstream report;
  report.setf(std::ios::fixed);
  report.precision(9);
  if (!a.est_traj.empty()) {
    if (a.gt_traj.empty()) throw Error(ErrorCode::kInvalidArgument, "--est needs --gt");
    const AteReport r = ate(read_tum_trajectory(a.est_traj), read_tum_trajectory(a.gt_traj));
    report << "ate_rmse = " << r.rmse << "\nate_frames = " << r.per_frame_errors.size() << "\n";
    if (!a.out.empty()) {
      fs::create_directories(a.out);
      auto os = open_out(fs::path(a.out) / "per_frame_errors.csv");
      os.setf(std::ios::fixed);
      os.precision(9);
      os << "frame,error_m\n";
      for (std::size_t i = 0; i < r.per_frame_errors.size(); ++i) os << i << "," << r.per_frame_errors[i] << "\n";
    }
  }
  if (!a.pred_masks.empty()) {
    if (a.gt_masks.empty()) throw Error(ErrorCode::kInvalidArgument, "--pred-masks needs --gt-masks");
    auto pred = read_masks(a.pred_masks);
    auto gt = read_masks(a.gt_masks);
    intersect_frames(pred, gt);
    if (gt.empty()) throw Error(ErrorCode::kInsufficientOverlap, "no frame appears in both mask directories");
    const SegReport s = evaluate_segmentation(pred, gt);
    report << "seg_frames = " << gt.size() << "\nmiou = " << s.miou << "\nmap50 = " << s.map50 << "\n";
    for (const auto& [cls, sc] : s.per_class) {
      report << "class_" << cls << "_iou = " << sc.iou << "\nclass_" << cls << "_ap50 = " << sc.ap50 << "\n";
    }
  }
  std::cout << report.str();
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    auto os = open_out(fs::path(a.out) / "evaluation.kv");
    os << report.str();
  }
  return 0;
}

int cmd_experiment(const PipelineConfig& cfg) {
  if (cfg.dataset.empty() && cfg.scene.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "experiment needs a dataset or a scene");
  }
  const fs::path out = require_output(cfg);
  const ExperimentReport rep = run_experiment(cfg);
  write_reports(out, rep);
  write_report_text(std::cout, rep);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"segmentation-gated RGB-D tracking on simulated scenes"};
  app.require_subcommand(1);

  std::string sim_scene, sim_out;
  bool sim_second = false;
  std::uint64_t sim_noise_seed = 0;
  auto* sim = app.add_subcommand("simulate", "render a scene file into a dataset directory");
  sim->add_option("-s,--scene", sim_scene, "scene file")->required()->check(CLI::ExistingFile);
  sim->add_option("-o,--out", sim_out, "dataset directory")->required();
  sim->add_flag("--second-pass", sim_second, "render the revisit with relocated objects");
  auto* sim_seed_opt = sim->add_option("--noise-seed", sim_noise_seed, "measurement noise seed");

  PipelineArgs track_args;
  auto* track = app.add_subcommand("track", "track a dataset, writing trajectory, maps and masks");
  track->add_option("-d,--dataset", track_args.dataset, "dataset directory");
  track->add_option("-o,--out", track_args.output, "output directory");
  add_pipeline_options(track, track_args);

  PipelineArgs reloc_args;
  auto* reloc = app.add_subcommand("relocalize", "relocalize every frame of a dataset against a saved map");
  reloc->add_option("-d,--dataset", reloc_args.dataset, "dataset directory");
  reloc->add_option("-m,--map", reloc_args.map, "map file written by track");
  reloc->add_option("-o,--out", reloc_args.output, "output directory");
  add_pipeline_options(reloc, reloc_args);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("evaluate", "ATE and mask metrics against references");
  eval->add_option("--gt", eval_args.gt_traj, "reference TUM trajectory")->check(CLI::ExistingFile);
  eval->add_option("--est", eval_args.est_traj, "estimated TUM trajectory")->check(CLI::ExistingFile);
  eval->add_option("--gt-masks", eval_args.gt_masks, "reference mask directory")->check(CLI::ExistingDirectory);
  eval->add_option("--pred-masks", eval_args.pred_masks, "predicted mask directory")->check(CLI::ExistingDirectory);
  eval->add_option("-o,--out", eval_args.out, "report directory");

  PipelineArgs exp_args;
  auto* exp = app.add_subcommand("experiment", "repeated runs with aggregated reports");
  exp->add_option("-d,--dataset", exp_args.dataset, "dataset directory");
  exp->add_option("-s,--scene", exp_args.scene, "scene file, used when no dataset is given");
  exp->add_option("-o,--out", exp_args.output, "report directory");
  add_pipeline_options(exp, exp_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_scene, sim_out, sim_second, sim_noise_seed, sim_seed_opt->count() > 0);
    if (track->parsed()) return cmd_track(resolve(track, track_args));
    if (reloc->parsed()) return cmd_relocalize(resolve(reloc, reloc_args));
    if (eval->parsed()) return cmd_evaluate(eval_args);
    if (exp->parsed()) return cmd_experiment(resolve(exp, exp_args));
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
