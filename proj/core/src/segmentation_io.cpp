#include "segslam/segmentation_io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "segslam/error.hpp"
#include "segslam/pgm.hpp"

namespace segslam {

void write_segmentation(const std::filesystem::path& pgm_path, const std::filesystem::path& sidecar_path,
                        const FrameSegmentation& seg) {
  GrayImage img;
  img.width = seg.width;
  img.height = seg.height;
  int max_label = 0;
  for (const auto& r : seg.regions) {
    if (r.instance_id < 0 || r.instance_id >= 65535) {
      throw Error(ErrorCode::kInvalidArgument, "instance id does not fit a 16-bit mask");
    }
    max_label = std::max(max_label, r.instance_id + 1);
  }
  img.maxval = max_label < 256 ? 255 : 65535;
  img.pixels.assign(static_cast<std::size_t>(seg.width) * seg.height, 0);
  for (const auto& r : seg.regions) {
    const auto& bits = r.mask.data();
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i]) img.pixels[i] = static_cast<std::uint16_t>(r.instance_id + 1);
    }
  }
  write_pgm(pgm_path, img);

  std::ofstream side(sidecar_path);
  if (!side) throw Error(ErrorCode::kIo, "cannot write " + sidecar_path.string());
  for (const auto& r : seg.regions) {
    side << r.instance_id << " " << r.class_id << " " << std::setprecision(17) << r.confidence << "\n";
  }
}

FrameSegmentation read_segmentation(const std::filesystem::path& pgm_path,
                                    const std::filesystem::path& sidecar_path, int frame_index) {
  const GrayImage img = read_pgm(pgm_path);
  std::map<int, int> class_of;
  std::map<int, double> confidence_of;
  std::ifstream side(sidecar_path);
  if (!side) throw Error(ErrorCode::kIo, "cannot open " + sidecar_path.string());
  std::string line;
  while (std::getline(side, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int id = 0, cls = 0;
    if (!(ls >> id >> cls)) throw Error(ErrorCode::kParse, "bad sidecar line in " + sidecar_path.string());
    double conf = 1.0;
    if (!(ls >> conf)) conf = 1.0;
    class_of[id] = cls;
    confidence_of[id] = conf;
  }
  std::vector<int> labels(img.pixels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(img.pixels[i]) - 1;
  FrameSegmentation seg = FrameSegmentation::from_label_grid(frame_index, img.width, img.height, labels, class_of);
  for (auto& r : seg.regions) {
    if (!class_of.count(r.instance_id)) {
      throw Error(ErrorCode::kParse, "instance " + std::to_string(r.instance_id) + " missing from sidecar");
    }
    r.confidence = confidence_of[r.instance_id];
  }
  return seg;
}

ClassTable read_class_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  ClassTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string id_s, name, mov_s;
    if (!std::getline(ls, id_s, ',') || !std::getline(ls, name, ',') || !std::getline(ls, mov_s)) {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(lineno) + ": expected class_id,name,moveable");
    }
    while (!mov_s.empty() && (mov_s.back() == '\r' || mov_s.back() == ' ')) mov_s.pop_back();
    bool moveable = false;
    if (mov_s == "1" || mov_s == "true") {
      moveable = true;
    } else if (mov_s != "0" && mov_s != "false") {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(lineno) + ": moveable must be 0/1");
    }
    try {
      table.add(std::stoi(id_s), name, moveable);
    } catch (const std::invalid_argument&) {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(lineno) + ": bad class id");
    }
  }
  return table;
}

void write_class_table(const std::filesystem::path& path, const ClassTable& table) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "# class_id,name,moveable\n";
  for (const auto& [id, info] : table.entries()) {
    out << id << "," << info.name << "," << (info.moveable ? 1 : 0) << "\n";
  }
}

}  // namespace segslam
