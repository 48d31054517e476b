#include "segslam/pgm.hpp"

#include <cctype>
#include <fstream>
#include <string>

#include "segslam/error.hpp"

namespace segslam {
namespace {

// Next whitespace-delimited header token, skipping `#` comments.
std::string header_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      if (!tok.empty()) break;
    } else {
      tok.push_back(static_cast<char>(c));
    }
    c = in.get();
  }
  return tok;
}

int header_int(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = header_token(in);
  try {
    return std::stoi(tok);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kParse, "bad PGM header in " + path.string());
  }
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  const std::string magic = header_token(in);
  if (magic != "P2" && magic != "P5") throw Error(ErrorCode::kParse, path.string() + " is not a PGM");
  GrayImage img;
  img.width = header_int(in, path);
  img.height = header_int(in, path);
  img.maxval = header_int(in, path);
  if (img.width <= 0 || img.height <= 0 || img.maxval <= 0 || img.maxval > 65535) {
    throw Error(ErrorCode::kParse, "bad PGM dimensions in " + path.string());
  }
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  img.pixels.resize(n);
  if (magic == "P2") {
    for (std::size_t i = 0; i < n; ++i) {
      long v = 0;
      if (!(in >> v) || v < 0 || v > img.maxval) throw Error(ErrorCode::kParse, "bad sample in " + path.string());
      img.pixels[i] = static_cast<std::uint16_t>(v);
    }
    return img;
  }
  // header_token consumed exactly one whitespace byte after maxval.
  const bool wide = img.maxval > 255;
  std::vector<unsigned char> buf(n * (wide ? 2 : 1));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
    throw Error(ErrorCode::kParse, "truncated PGM " + path.string());
  }
  for (std::size_t i = 0; i < n; ++i) {
    img.pixels[i] = wide ? static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]) : buf[i];
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "P5\n" << img.width << " " << img.height << "\n" << img.maxval << "\n";
  const bool wide = img.maxval > 255;
  std::vector<unsigned char> buf;
  buf.reserve(img.pixels.size() * (wide ? 2 : 1));
  for (const std::uint16_t p : img.pixels) {
    if (wide) buf.push_back(static_cast<unsigned char>(p >> 8));
    buf.push_back(static_cast<unsigned char>(p & 0xFF));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

}  // namespace segslam
