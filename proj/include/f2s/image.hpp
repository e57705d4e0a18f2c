#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "f2s/tensor.hpp"

namespace f2s {

// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct RasterImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  void validate() const;
  std::uint8_t channel(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }
};

// Binary P6 portable pixmap, maxval 255 only. Header comments allowed.
RasterImage read_ppm(const std::filesystem::path& path);

// Hexcone RGB -> HSV with all three channels in [0,1]; H = 0 for gray.
void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v);

struct HsvChannels {
  bool h = false, s = false, v = false;

  // Subset string over {h,s,v}, e.g. "hs" or "hsv"; order/case ignored.
  static HsvChannels parse(const std::string& spec);
  std::size_t count() const {
    return (h ? 1u : 0u) + (s ? 1u : 0u) + (v ? 1u : 0u);
  }
};

// Per grid cell (g x g, remainder pixels going to the last row/column of
// cells) and per selected channel: mean then population variance. Output is
// cells row-major, channels in H,S,V order, mean before variance; length
// g*g*|channels|*2.
Tensor1 hsv_grid_stats(const RasterImage& img, std::size_t grid, HsvChannels channels);

// Per grid cell: population variance of the 4-neighbour Laplacian of luma
// (0.299 R + 0.587 G + 0.114 B), zero-padded at the image borders. Output
// row-major, length g*g.
Tensor1 sharpness_grid_stats(const RasterImage& img, std::size_t grid);

}  // namespace f2s
