#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cpgan/tensor.hpp"

// 8-bit RGB PNG round-trip for image tensors stored channels-first with
// values in [-1, 1].

namespace cpgan {

using PngText = std::vector<std::pair<std::string, std::string>>;

/// Writes a C x H x W tensor (C = 3 or 1) as an RGB or grayscale PNG,
/// clamping values into [-1, 1] before the 8-bit mapping. `text` entries are
/// embedded as tEXt chunks (provenance: config echo, version).
void write_png(const std::string& path, const Tensor<float>& chw, const PngText& text = {});

/// tEXt chunks of a PNG file, keyed by chunk keyword.
PngText read_png_text(const std::string& path);

/// Reads a PNG into a C x H x W tensor in [-1, 1]. Grayscale files come back
/// with C = 1, everything else as C = 3.
Tensor<float> read_png(const std::string& path);

}  // namespace cpgan
