#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace drivemap::tools {

using Rgb = std::array<std::uint8_t, 3>;

/// Symmetric diverging colormap on [-range, range]: blue at -range, white at 0, red at +range.
/// Values outside the range saturate; range <= 0 maps everything to white.
Rgb diverging_color(double value, double range);

/// Applies diverging_color to a row-major plane.
std::vector<std::uint8_t> colorize(std::span<const float> plane, double range);

/// 8-bit RGB PNG, written atomically.
void write_png_rgb(const std::filesystem::path& path, int width, int height, std::span<const std::uint8_t> rgb);

/// Binary PGM with maxval 65535 (big-endian samples), written atomically.
void write_pgm16(const std::filesystem::path& path, int width, int height, std::span<const std::uint16_t> values);

} // namespace drivemap::tools
