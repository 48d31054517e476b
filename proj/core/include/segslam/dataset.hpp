#pragma once

#include <filesystem>
#include <limits>
#include <memory>
#include <optional>

#include "segslam/evaluation.hpp"
#include "segslam/observation.hpp"
#include "segslam/segmentation.hpp"
#include "segslam/simulator.hpp"

namespace segslam {

/// Sequential access to a sequence's frames. Segmentations are the
/// reference masks the coarse segmenter input is derived from.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::size_t size() const = 0;
  virtual const CameraModel& camera() const = 0;
  virtual const ClassTable& classes() const = 0;
  virtual FrameObservation observation(std::size_t i) const = 0;
  virtual FrameSegmentation segmentation(std::size_t i) const = 0;
  /// Ground-truth trajectory when known, otherwise empty.
  virtual const Trajectory& groundtruth() const = 0;
};

/// Serves frames straight from a simulator bundle. The bundle must outlive
/// the source.
class BundleSource final : public FrameSource {
 public:
  explicit BundleSource(const GroundTruthBundle& bundle, std::size_t max_frames = std::numeric_limits<std::size_t>::max());
  std::size_t size() const override { return n_; }
  const CameraModel& camera() const override { return b_.cam; }
  const ClassTable& classes() const override { return b_.classes; }
  FrameObservation observation(std::size_t i) const override { return b_.observations.at(i); }
  FrameSegmentation segmentation(std::size_t i) const override { return b_.segmentations.at(i); }
  const Trajectory& groundtruth() const override { return gt_; }

 private:
  const GroundTruthBundle& b_;
  std::size_t n_;
  Trajectory gt_;
};

// Dataset directory:
//   camera.cfg                   key = value intrinsics
//   classes.csv                  class_id,name,moveable
//   frames.txt                   `frame_index timestamp` per frame
//   groundtruth.txt              TUM trajectory (optional)
//   features/NNNNNN.txt          `u v raw_depth descriptor_hex landmark_id`
//                                (landmark_id -1 when unknown)
//   depth/NNNNNN.pgm             16-bit raw depth
//   masks/NNNNNN.pgm + .txt      instance masks, see segmentation_io.hpp
//   scene.toml                   generating scene, when simulated

/// Reads the directory index eagerly and frame files on demand.
class DatasetSource final : public FrameSource {
 public:
  /// Throws kIo if the directory or its index files are missing.
  explicit DatasetSource(std::filesystem::path dir);
  std::size_t size() const override { return frames_.size(); }
  const CameraModel& camera() const override { return cam_; }
  const ClassTable& classes() const override { return classes_; }
  FrameObservation observation(std::size_t i) const override;
  FrameSegmentation segmentation(std::size_t i) const override;
  const Trajectory& groundtruth() const override { return gt_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  CameraModel cam_;
  ClassTable classes_;
  std::vector<std::pair<int, double>> frames_;
  Trajectory gt_;
};

std::string frame_stem(int frame_index);

void write_features(const std::filesystem::path& path, const FrameObservation& obs);
std::vector<Feature> read_features(const std::filesystem::path& path);

void write_depth(const std::filesystem::path& path, const DepthGrid& depth);
DepthGrid read_depth(const std::filesystem::path& path);

/// Writes the full dataset layout. `scene` is copied alongside when given.
void write_dataset(const std::filesystem::path& dir, const GroundTruthBundle& bundle,
                   const SceneSpec* scene = nullptr);

}  // namespace segslam
