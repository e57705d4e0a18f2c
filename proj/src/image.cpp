#include "f2s/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "f2s/error.hpp"

namespace f2s {

void RasterImage::validate() const {
  if (width < 1 || height < 1) throw DataError("image: width and height must be >= 1");
  if (pixels.size() != width * height * 3) {
    throw DataError("image: pixel buffer has " + std::to_string(pixels.size()) +
                    " bytes, expected " + std::to_string(width * height * 3));
  }
}

namespace {

bool is_ppm_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
}

struct PpmParser {
  const std::string& data;
  const std::string path;
  std::size_t pos = 0;

  std::string next_token() {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (is_ppm_space(data[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < data.size() && !is_ppm_space(data[pos]) && data[pos] != '#') ++pos;
    if (start == pos) throw DataError(path + ": truncated header");
    return data.substr(start, pos - start);
  }

  std::size_t next_uint(const char* what) {
    const std::string tok = next_token();
    std::size_t value = 0;
    for (char c : tok) {
      if (c < '0' || c > '9') {
        throw DataError(path + ": bad " + std::string(what) + " \"" + tok + "\"");
      }
      value = value * 10 + static_cast<std::size_t>(c - '0');
      if (value > 1u << 30) throw DataError(path + ": " + what + " out of range");
    }
    return value;
  }
};

}  // namespace

RasterImage read_ppm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  PpmParser p{data, path.string()};
  if (p.next_token() != "P6") throw DataError(path.string() + ": not a binary P6 pixmap");
  RasterImage img;
  img.width = p.next_uint("width");
  img.height = p.next_uint("height");
  const std::size_t maxval = p.next_uint("maxval");
  if (img.width < 1 || img.height < 1) {
    throw DataError(path.string() + ": width and height must be >= 1");
  }
  if (maxval != 255) {
    throw DataError(path.string() + ": unsupported maxval " + std::to_string(maxval) +
                    " (only 255)");
  }
  // Exactly one whitespace byte separates the header from the pixel bytes.
  if (p.pos >= data.size() || !is_ppm_space(data[p.pos])) {
    throw DataError(path.string() + ": missing pixel-data separator");
  }
  ++p.pos;
  const std::size_t need = img.width * img.height * 3;
  if (data.size() - p.pos < need) {
    throw DataError(path.string() + ": truncated pixel data (" +
                    std::to_string(data.size() - p.pos) + " of " + std::to_string(need) +
                    " bytes)");
  }
  img.pixels.assign(data.begin() + static_cast<std::ptrdiff_t>(p.pos),
                    data.begin() + static_cast<std::ptrdiff_t>(p.pos + need));
  img.validate();
  return img;
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    h = 0.0;  // gray
    return;
  }
  double hh;
  if (mx == r) {
    hh = (g - b) / d;
    if (hh < 0.0) hh += 6.0;
  } else if (mx == g) {
    hh = (b - r) / d + 2.0;
  } else {
    hh = (r - g) / d + 4.0;
  }
  h = hh / 6.0;
}

HsvChannels HsvChannels::parse(const std::string& spec) {
  HsvChannels ch;
  for (char raw : spec) {
    switch (std::tolower(static_cast<unsigned char>(raw))) {
      case 'h': ch.h = true; break;
      case 's': ch.s = true; break;
      case 'v': ch.v = true; break;
      default:
        throw ConfigError(std::string("channels: unknown channel '") + raw +
                          "' (expected a subset of \"hsv\")");
    }
  }
  if (ch.count() == 0) throw ConfigError("channels: need at least one of h, s, v");
  return ch;
}

namespace {

struct CellRange {
  std::size_t lo, hi;  // [lo, hi)
};

// Equal split with the remainder pixels folded into the last cell.
CellRange cell_range(std::size_t extent, std::size_t grid, std::size_t index) {
  const std::size_t base = extent / grid;
  const std::size_t lo = index * base;
  const std::size_t hi = index + 1 == grid ? extent : lo + base;
  return {lo, hi};
}

void check_grid(const RasterImage& img, std::size_t grid) {
  img.validate();
  if (grid < 1) throw ConfigError("grid: must be >= 1");
  if (img.width < grid || img.height < grid) {
    throw DataError("grid: image " + std::to_string(img.width) + "x" +
                    std::to_string(img.height) + " is smaller than a " + std::to_string(grid) +
                    "x" + std::to_string(grid) + " grid");
  }
}

// Mean then population variance of f(x, y) over a pixel rectangle.
template <typename F>
void mean_var(const CellRange& xs, const CellRange& ys, F&& f, double& mean, double& var) {
  const double n = static_cast<double>((xs.hi - xs.lo) * (ys.hi - ys.lo));
  double acc = 0.0;
  for (std::size_t y = ys.lo; y < ys.hi; ++y)
    for (std::size_t x = xs.lo; x < xs.hi; ++x) acc += f(x, y);
  mean = acc / n;
  double sq = 0.0;
  for (std::size_t y = ys.lo; y < ys.hi; ++y)
    for (std::size_t x = xs.lo; x < xs.hi; ++x) {
      const double d = f(x, y) - mean;
      sq += d * d;
    }
  var = sq / n;
}

}  // namespace

Tensor1 hsv_grid_stats(const RasterImage& img, std::size_t grid, HsvChannels channels) {
  check_grid(img, grid);
  // Convert once; cells then read the planes.
  const std::size_t npx = img.width * img.height;
  std::vector<double> H(npx), S(npx), V(npx);
  for (std::size_t i = 0; i < npx; ++i) {
    rgb_to_hsv(img.pixels[i * 3] / 255.0, img.pixels[i * 3 + 1] / 255.0,
               img.pixels[i * 3 + 2] / 255.0, H[i], S[i], V[i]);
  }
  const double* planes[3] = {H.data(), S.data(), V.data()};
  const bool selected[3] = {channels.h, channels.s, channels.v};

  Tensor1 out(grid * grid * channels.count() * 2);
  std::size_t k = 0;
  for (std::size_t cy = 0; cy < grid; ++cy) {
    const CellRange ys = cell_range(img.height, grid, cy);
    for (std::size_t cx = 0; cx < grid; ++cx) {
      const CellRange xs = cell_range(img.width, grid, cx);
      for (std::size_t c = 0; c < 3; ++c) {
        if (!selected[c]) continue;
        const double* plane = planes[c];
        double mean, var;
        mean_var(xs, ys, [&](std::size_t x, std::size_t y) { return plane[y * img.width + x]; },
                 mean, var);
        out[k++] = mean;
        out[k++] = var;
      }
    }
  }
  return out;
}

Tensor1 sharpness_grid_stats(const RasterImage& img, std::size_t grid) {
  check_grid(img, grid);
  const std::size_t w = img.width, h = img.height;
  std::vector<double> luma(w * h);
  for (std::size_t i = 0; i < w * h; ++i) {
    luma[i] = 0.299 * img.pixels[i * 3] + 0.587 * img.pixels[i * 3 + 1] +
              0.114 * img.pixels[i * 3 + 2];
  }
  auto at = [&](std::ptrdiff_t x, std::ptrdiff_t y) -> double {
    if (x < 0 || y < 0 || x >= static_cast<std::ptrdiff_t>(w) ||
        y >= static_cast<std::ptrdiff_t>(h)) {
      return 0.0;  // zero padding
    }
    return luma[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  };
  std::vector<double> lap(w * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const auto xi = static_cast<std::ptrdiff_t>(x);
      const auto yi = static_cast<std::ptrdiff_t>(y);
      lap[y * w + x] =
          at(xi - 1, yi) + at(xi + 1, yi) + at(xi, yi - 1) + at(xi, yi + 1) - 4.0 * at(xi, yi);
    }
  }
  Tensor1 out(grid * grid);
  std::size_t k = 0;
  for (std::size_t cy = 0; cy < grid; ++cy) {
    const CellRange ys = cell_range(h, grid, cy);
    for (std::size_t cx = 0; cx < grid; ++cx) {
      const CellRange xs = cell_range(w, grid, cx);
      double mean, var;
      mean_var(xs, ys, [&](std::size_t x, std::size_t y) { return lap[y * w + x]; }, mean, var);
      out[k++] = var;
    }
  }
  return out;
}

}  // namespace f2s
