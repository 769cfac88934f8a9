#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "rpn2t/geometry.hpp"
#include "rpn2t/tensor.hpp"

namespace rpn2t {

/// Interleaved (HWC) image with float samples on the 0..255 scale.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<float> pixels;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f);

  bool empty() const { return pixels.empty(); }
  float& at(int x, int y, int c) {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Per-channel normalisation applied when an image becomes network input:
/// (pixel - mean[c]) * scale.
struct PixelNorm {
  std::array<float, 3> mean{128.0f, 128.0f, 128.0f};
  float scale = 1.0f / 128.0f;
};

// Bilinear sample of the square `region` (edge-replicated outside the image)
// onto an out x out grid. Output pixel u maps to source x0 + (u + 0.5) * s / out - 0.5.
Image resample_region(const Image& img, const Rect& region, int out);

Image resize_bilinear(const Image& img, int out_w, int out_h);

// Writes `img` into item `index` of a [N, C, H, W] tensor after normalisation.
void write_tensor(const Image& img, const PixelNorm& norm, Tensor& batch, int index);
Tensor to_tensor(const Image& img, const PixelNorm& norm);

// 8-bit gray, gray+alpha, RGB or RGBA PNGs; alpha is dropped.
Image load_png(const std::filesystem::path& path);
// Values are rounded and clamped to 0..255.
void save_png(const Image& img, const std::filesystem::path& path);

}  // namespace rpn2t
