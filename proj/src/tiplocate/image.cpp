#include "endotrack/tiplocate/image.hpp"

#include <algorithm>
#include <fstream>
#include <cctype>

#include "endotrack/error.hpp"

namespace endotrack::tiplocate {

std::size_t count_true(const BinaryMask& m) {
  return static_cast<std::size_t>(std::count_if(m.data.begin(), m.data.end(), [](auto v) { return v != 0; }));
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string token(std::istream& in) {
  std::string t;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!t.empty()) break;
      continue;
    }
    t.push_back(c);
  }
  return t;
}

}  // namespace

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  if (token(in) != "P5") throw Error(Errc::Io, path + " is not a binary PGM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token(in));
    h = std::stoi(token(in));
    maxval = std::stoi(token(in));
  } catch (const std::exception&) {
    throw Error(Errc::Io, "malformed PGM header in " + path);
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw Error(Errc::Io, "unsupported PGM geometry in " + path);
  GrayImage img(w, h);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size())) throw Error(Errc::Io, "truncated PGM " + path);
  return img;
}

void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (!out) throw Error(Errc::Io, "write failed for " + path);
}

BinaryMask read_mask(const std::string& path) {
  BinaryMask m = read_pgm(path);
  for (auto& v : m.data) v = v >= 128 ? 1 : 0;
  return m;
}

void write_mask(const std::string& path, const BinaryMask& m) {
  GrayImage img = m;
  for (auto& v : img.data) v = v ? 255 : 0;
  write_pgm(path, img);
}

}  // namespace endotrack::tiplocate
