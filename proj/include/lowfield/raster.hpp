#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace lowfield {

/// 8-bit grayscale image, row-major.
struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  Raster() = default;
  Raster(std::size_t w, std::size_t h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(w * h, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  void fill_rect(std::size_t x0, std::size_t y0, std::size_t w, std::size_t h, std::uint8_t v);
};

void write_png(const Raster& image, const std::filesystem::path& path);
Raster read_png(const std::filesystem::path& path);

}  // namespace lowfield
