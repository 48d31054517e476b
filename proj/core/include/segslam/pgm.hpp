#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace segslam {

/// Grayscale image as read from / written to a portable graymap.
struct GrayImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<std::uint16_t> pixels;
};

/// Reads plain (P2) or binary (P5) PGM, 8 or 16 bit. 16-bit binary samples
/// are big-endian as the format requires.
GrayImage read_pgm(const std::filesystem::path& path);

/// Writes binary P5; 8-bit samples when maxval < 256, else 16-bit.
void write_pgm(const std::filesystem::path& path, const GrayImage& img);

}  // namespace segslam
