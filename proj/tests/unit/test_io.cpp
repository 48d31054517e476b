#include <fstream>
#include <functional>
#include <sstream>

#include <gtest/gtest.h>

#include "segslam/config.hpp"
#include "segslam/dataset.hpp"
#include "segslam/error.hpp"
#include "segslam/pgm.hpp"
#include "segslam/scene_io.hpp"
#include "segslam/segmentation_io.hpp"
#include "scenes.hpp"
#include "unit/support.hpp"

using namespace segslam;
using segslam::testing::TempDir;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInvalidArgument;
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p) << s;
}

}  // namespace

TEST(KeyValueConfig, ParsesAndOverrides) {
  const auto kv = KeyValueConfig::parse("# comment\n a = 1.5\n\nname = hello world  # trailing\nflag = true\na = 2\n");
  EXPECT_EQ(kv.get_double("a", 0), 2.0);
  EXPECT_EQ(kv.get_string("name", ""), "hello world");
  EXPECT_TRUE(kv.get_bool("flag", false));
  EXPECT_EQ(kv.get_int("missing", 7), 7);
  EXPECT_EQ(code_of([] { KeyValueConfig::parse("no equals sign"); }), ErrorCode::kParse);
  EXPECT_EQ(code_of([&] { kv.get_int("name", 0); }), ErrorCode::kParse);
  KeyValueConfig over = KeyValueConfig::parse("a = 3");
  KeyValueConfig base = kv;
  base.merge(over);
  EXPECT_EQ(base.get_double("a", 0), 3.0);
}

TEST(CameraConfig, RoundTrip) {
  CameraModel c;
  c.fx = 400.25;
  c.cy = 100.5;
  c.width = 320;
  c.height = 240;
  c.cx = 160;
  c.depth_factor = 5000;
  std::ostringstream os;
  write_camera_config(os, c);
  const CameraModel back = camera_from_config(KeyValueConfig::parse(os.str()));
  EXPECT_EQ(back.fx, c.fx);
  EXPECT_EQ(back.cy, c.cy);
  EXPECT_EQ(back.width, c.width);
  EXPECT_EQ(back.depth_factor, c.depth_factor);
  EXPECT_THROW(camera_from_config(KeyValueConfig::parse("fx = -1")), Error);
}

TEST(SceneIo, SaveLoadRoundTrip) {
  TempDir dir;
  SceneSpec s = segslam::testing::revisit_scene(30);
  s.noise_seed = 42;
  s.second_pass_offset = Pose(exp_so3(Point3(0, 0.05, 0)), Point3(0.1, 0, 0.05));
  save_scene(dir.path() / "s.toml", s);
  const SceneSpec back = load_scene(dir.path() / "s.toml");
  EXPECT_EQ(back.seed, s.seed);
  EXPECT_EQ(back.noise_seed, s.noise_seed);
  EXPECT_EQ(back.n_frames, s.n_frames);
  ASSERT_EQ(back.objects.size(), s.objects.size());
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    EXPECT_EQ(back.objects[i].center, s.objects[i].center);
    EXPECT_EQ(back.objects[i].motion, s.objects[i].motion);
    EXPECT_EQ(back.objects[i].relocated_center, s.objects[i].relocated_center);
  }
  EXPECT_EQ(back.classes.entries().size(), s.classes.entries().size());
  EXPECT_LT((back.second_pass_offset.rotation() - s.second_pass_offset.rotation()).norm(), 1e-12);
  const GroundTruthBundle a = generate(s), b = generate(back);
  EXPECT_EQ(a.landmark_positions, b.landmark_positions);
}

TEST(SceneIo, RejectsUnknownKeys) {
  EXPECT_EQ(code_of([] { parse_scene("seed = 1\nbogus = 2\n"); }), ErrorCode::kParse);
  EXPECT_EQ(code_of([] { parse_scene("[camera]\nfx = \"x\"\n"); }), ErrorCode::kParse);
}

TEST(SceneIo, ParsesHandWrittenScene) {
  const SceneSpec s = parse_scene(R"(
seed = 3
n_frames = 5
feature_noise_px = 0.25
[camera]
fx = 300
[trajectory]
kind = "arc"
radius = 2.5
[[classes]]
id = 1
name = "person"
moveable = true
[[objects]]
class_id = 1
center = [0, 0, 2]
extents = [0.5, 1, 0.3]
surface_points = 50
motion = "linear"
velocity = [0.1, 0, 0]
)");
  EXPECT_EQ(s.seed, 3u);
  EXPECT_EQ(s.cam.fx, 300);
  EXPECT_EQ(s.arc.radius, 2.5);
  ASSERT_EQ(s.objects.size(), 1u);
  EXPECT_EQ(s.objects[0].motion, ObjectMotion::kLinearVelocity);
  EXPECT_TRUE(s.classes.find(1)->moveable);
}

TEST(Pgm, EightAndSixteenBitRoundTrip) {
  TempDir dir;
  for (int maxval : {255, 65535}) {
    GrayImage img;
    img.width = 7;
    img.height = 3;
    img.maxval = maxval;
    for (int i = 0; i < 21; ++i) img.pixels.push_back(static_cast<std::uint16_t>((i * 9973) % (maxval + 1)));
    write_pgm(dir.path() / "x.pgm", img);
    const GrayImage back = read_pgm(dir.path() / "x.pgm");
    EXPECT_EQ(back.width, 7);
    EXPECT_EQ(back.height, 3);
    EXPECT_EQ(back.pixels, img.pixels);
  }
}

TEST(Pgm, ReadsPlainFormatAndRejectsGarbage) {
  TempDir dir;
  write_text(dir.path() / "p2.pgm", "P2\n# c\n3 2\n9\n0 1 2\n3 4 9\n");
  const GrayImage img = read_pgm(dir.path() / "p2.pgm");
  EXPECT_EQ(img.pixels, (std::vector<std::uint16_t>{0, 1, 2, 3, 4, 9}));
  write_text(dir.path() / "bad.pgm", "P7\n1 1\n255\n");
  EXPECT_EQ(code_of([&] { read_pgm(dir.path() / "bad.pgm"); }), ErrorCode::kParse);
  EXPECT_EQ(code_of([&] { read_pgm(dir.path() / "none.pgm"); }), ErrorCode::kIo);
}

TEST(SegmentationIo, RoundTrip) {
  TempDir dir;
  FrameSegmentation s(3, 40, 30);
  for (int k = 0; k < 3; ++k) {
    SegmentedRegion r;
    r.instance_id = k * 300;
    r.class_id = k + 1;
    r.confidence = 0.9 + 0.05 * k;
    r.mask = BinaryMask(40, 30);
    for (int y = 0; y < 10; ++y)
      for (int x = 10 * k; x < 10 * k + 5; ++x) r.mask.set(x, y + k);
    s.regions.push_back(r);
  }
  write_segmentation(dir.path() / "m.pgm", dir.path() / "m.txt", s);
  const FrameSegmentation back = read_segmentation(dir.path() / "m.pgm", dir.path() / "m.txt", 3);
  ASSERT_EQ(back.regions.size(), 3u);
  for (const auto& r : s.regions) {
    const auto* b = back.find(r.instance_id);
    ASSERT_NE(b, nullptr);
    EXPECT_EQ(b->mask, r.mask);
    EXPECT_EQ(b->class_id, r.class_id);
    EXPECT_EQ(b->confidence, r.confidence);
  }
}

TEST(ClassTableIo, RoundTripAndErrors) {
  TempDir dir;
  ClassTable t;
  t.add(1, "person", true);
  t.add(5, "monitor", false);
  write_class_table(dir.path() / "c.csv", t);
  const ClassTable back = read_class_table(dir.path() / "c.csv");
  ASSERT_EQ(back.entries().size(), 2u);
  EXPECT_TRUE(back.find(1)->moveable);
  EXPECT_EQ(back.find(5)->name, "monitor");
  write_text(dir.path() / "bad.csv", "1,person,maybe\n");
  EXPECT_EQ(code_of([&] { read_class_table(dir.path() / "bad.csv"); }), ErrorCode::kParse);
}

TEST(Dataset, WriteThenReadMatchesBundle) {
  TempDir dir;
  const SceneSpec spec = segslam::testing::desk_scene(true, 4);
  const GroundTruthBundle b = generate(spec);
  write_dataset(dir.path() / "ds", b, &spec);
  const DatasetSource src(dir.path() / "ds");
  ASSERT_EQ(src.size(), b.n_frames());
  EXPECT_EQ(src.camera().fx, b.cam.fx);
  EXPECT_EQ(src.classes().entries().size(), b.classes.entries().size());
  ASSERT_EQ(src.groundtruth().size(), b.trajectory.size());
  for (std::size_t f = 0; f < b.n_frames(); ++f) {
    const FrameObservation o = src.observation(f);
    const auto& want = b.observations[f];
    EXPECT_EQ(o.frame_index, want.frame_index);
    EXPECT_EQ(o.depth.raw, want.depth.raw);
    ASSERT_EQ(o.features.size(), want.features.size());
    for (std::size_t i = 0; i < o.features.size(); ++i) {
      EXPECT_EQ(o.features[i].pixel.u, want.features[i].pixel.u);
      EXPECT_EQ(o.features[i].raw_depth, want.features[i].raw_depth);
      EXPECT_EQ(o.features[i].descriptor, want.features[i].descriptor);
    }
    const FrameSegmentation s = src.segmentation(f);
    ASSERT_EQ(s.regions.size(), b.segmentations[f].regions.size());
    for (std::size_t i = 0; i < s.regions.size(); ++i) {
      EXPECT_EQ(s.regions[i].mask, b.segmentations[f].regions[i].mask);
    }
  }
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "ds" / "scene.toml"));
  EXPECT_EQ(code_of([&] { DatasetSource missing(dir.path() / "nope"); }), ErrorCode::kIo);
}
