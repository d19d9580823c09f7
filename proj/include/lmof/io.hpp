#pragma once

#include <optional>
#include <string>

#include "lmof/image.hpp"

namespace lmof {

// Middlebury .flo: float tag 202021.25, i32 width, i32 height, then
// row-major interleaved (u, v) float pairs. All little-endian.
FlowField read_flo(const std::string& path);
void write_flo(const std::string& path, const FlowField& w);

/// Flow color wheel: hue from atan2(v, u), saturation from magnitude
/// (normalized by max_mag, auto = 99th percentile), zero flow is white.
Image flow_to_color(const FlowField& w, std::optional<double> max_mag = std::nullopt);

// Image files: PGM/PPM (P5/P6, 8- or 16-bit) and PNG (gray/RGB, 8/16-bit).
// Samples map linearly to [0,1] on read.
Image read_image(const std::string& path);
void write_image(const std::string& path, const Image& img, int bit_depth = 16);

}  // namespace lmof
