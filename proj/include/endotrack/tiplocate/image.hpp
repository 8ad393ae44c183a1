#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace endotrack::tiplocate {

/// Row-major single-channel raster.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

  bool empty() const { return data.empty(); }
  bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  T& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
  /// Value at (x, y), or `fallback` outside the raster.
  T get(int x, int y, T fallback = T{}) const { return inside(x, y) ? at(x, y) : fallback; }

  bool operator==(const Image&) const = default;
};

/// 1 = instrument, 0 = background.
using BinaryMask = Image<std::uint8_t>;
using GrayImage = Image<std::uint8_t>;

std::size_t count_true(const BinaryMask& m);

/// Binary PGM (P5, maxval 255). Masks are written as 0/255 and read with a
/// threshold at 128. Throws Io on failure.
GrayImage read_pgm(const std::string& path);
void write_pgm(const std::string& path, const GrayImage& img);
BinaryMask read_mask(const std::string& path);
void write_mask(const std::string& path, const BinaryMask& m);

}  // namespace endotrack::tiplocate
