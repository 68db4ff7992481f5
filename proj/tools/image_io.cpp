#include "image_io.hpp"

#include "drivemap/errors.hpp"
#include "drivemap/tensor_container.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <string>

namespace drivemap::tools {

namespace {

std::uint8_t lerp_byte(double from, double to, double t) {
  return static_cast<std::uint8_t>(std::lround(from + (to - from) * t));
}

void append_bytes(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void no_flush(png_structp) {}

} // namespace

Rgb diverging_color(double value, double range) {
  if (!(range > 0.0) || !std::isfinite(value)) {
    return {255, 255, 255};
  }
  const double t = std::clamp(value / range, -1.0, 1.0);
  // Endpoints: (59, 76, 192) and (180, 4, 38).
  if (t < 0.0) {
    const double s = -t;
    return {lerp_byte(255, 59, s), lerp_byte(255, 76, s), lerp_byte(255, 192, s)};
  }
  return {lerp_byte(255, 180, t), lerp_byte(255, 4, t), lerp_byte(255, 38, t)};
}

std::vector<std::uint8_t> colorize(std::span<const float> plane, double range) {
  std::vector<std::uint8_t> rgb(plane.size() * 3);
  for (std::size_t i = 0; i < plane.size(); ++i) {
    const Rgb c = diverging_color(plane[i], range);
    std::copy(c.begin(), c.end(), rgb.begin() + static_cast<std::ptrdiff_t>(3 * i));
  }
  return rgb;
}

void write_png_rgb(const std::filesystem::path& path, int width, int height, std::span<const std::uint8_t> rgb) {
  if (width < 1 || height < 1 || rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw DimensionError("PNG buffer does not match " + std::to_string(width) + "x" + std::to_string(height));
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path.string() + ": cannot initialise PNG writer");
  }
  std::vector<std::uint8_t> bytes;
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(width) * 3);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path.string() + ": PNG encoding failed");
  }
  png_set_write_fn(png, &bytes, append_bytes, no_flush);
  png_set_IHDR(
      png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_RGB,
      PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  write_file_atomic(path, bytes);
}

void write_pgm16(const std::filesystem::path& path, int width, int height, std::span<const std::uint16_t> values) {
  if (values.size() != static_cast<std::size_t>(width) * height) {
    throw DimensionError("PGM buffer does not match " + std::to_string(width) + "x" + std::to_string(height));
  }
  const std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n65535\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(bytes.size() + 2 * values.size());
  for (std::uint16_t v : values) {
    bytes.push_back(static_cast<std::uint8_t>(v >> 8));
    bytes.push_back(static_cast<std::uint8_t>(v & 0xff));
  }
  write_file_atomic(path, bytes);
}

} // namespace drivemap::tools
