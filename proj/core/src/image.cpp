#include "rpn2t/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "rpn2t/error.hpp"

namespace rpn2t {

Image::Image(int w, int h, int c, float fill)
    : width(w), height(h), channels(c),
      pixels(static_cast<size_t>(w) * static_cast<size_t>(h) * static_cast<size_t>(c), fill) {
  if (w <= 0 || h <= 0 || c <= 0) throw UsageError("image dimensions must be positive");
}

namespace {

struct Tap {
  int i0, i1;
  float f;
};

Tap tap(double src, int limit) {
  const double fl = std::floor(src);
  Tap t{static_cast<int>(fl), static_cast<int>(fl) + 1, static_cast<float>(src - fl)};
  t.i0 = std::clamp(t.i0, 0, limit - 1);
  t.i1 = std::clamp(t.i1, 0, limit - 1);
  return t;
}

}  // namespace

Image resample_region(const Image& img, const Rect& region, int out) {
  if (img.empty()) throw DataError("cannot sample from an empty image");
  if (out <= 0) throw UsageError("output size must be positive");
  validate(region);
  Image dst(out, out, img.channels);
  const double sx = region.w / out;
  const double sy = region.h / out;
  std::vector<Tap> xs(static_cast<size_t>(out));
  for (int u = 0; u < out; ++u) xs[static_cast<size_t>(u)] = tap(region.x + (u + 0.5) * sx - 0.5, img.width);
  const int C = img.channels;
  for (int v = 0; v < out; ++v) {
    const Tap ty = tap(region.y + (v + 0.5) * sy - 0.5, img.height);
    const float* r0 = img.pixels.data() + static_cast<size_t>(ty.i0) * img.width * C;
    const float* r1 = img.pixels.data() + static_cast<size_t>(ty.i1) * img.width * C;
    float* d = dst.pixels.data() + static_cast<size_t>(v) * out * C;
    for (int u = 0; u < out; ++u) {
      const Tap& tx = xs[static_cast<size_t>(u)];
      for (int c = 0; c < C; ++c) {
        const float top = r0[tx.i0 * C + c] + tx.f * (r0[tx.i1 * C + c] - r0[tx.i0 * C + c]);
        const float bot = r1[tx.i0 * C + c] + tx.f * (r1[tx.i1 * C + c] - r1[tx.i0 * C + c]);
        d[u * C + c] = top + ty.f * (bot - top);
      }
    }
  }
  return dst;
}

Image resize_bilinear(const Image& img, int out_w, int out_h) {
  if (img.empty()) throw DataError("cannot resize an empty image");
  if (out_w == out_h) {
    return resample_region(img, Rect{0, 0, double(img.width), double(img.height)}, out_w);
  }
  Image dst(out_w, out_h, img.channels);
  const double sx = double(img.width) / out_w;
  const double sy = double(img.height) / out_h;
  const int C = img.channels;
  for (int v = 0; v < out_h; ++v) {
    const Tap ty = tap((v + 0.5) * sy - 0.5, img.height);
    for (int u = 0; u < out_w; ++u) {
      const Tap tx = tap((u + 0.5) * sx - 0.5, img.width);
      for (int c = 0; c < C; ++c) {
        const float top = img.at(tx.i0, ty.i0, c) + tx.f * (img.at(tx.i1, ty.i0, c) - img.at(tx.i0, ty.i0, c));
        const float bot = img.at(tx.i0, ty.i1, c) + tx.f * (img.at(tx.i1, ty.i1, c) - img.at(tx.i0, ty.i1, c));
        dst.at(u, v, c) = top + ty.f * (bot - top);
      }
    }
  }
  return dst;
}

void write_tensor(const Image& img, const PixelNorm& norm, Tensor& batch, int index) {
  if (batch.rank() != 4 || batch.dim(1) != img.channels || batch.dim(2) != img.height ||
      batch.dim(3) != img.width || index < 0 || index >= batch.dim(0)) {
    throw UsageError("image does not fit the tensor slot");
  }
  if (img.channels > 3) throw UsageError("at most three channels supported");
  const size_t plane = static_cast<size_t>(img.width) * img.height;
  float* base = batch.ptr() + static_cast<size_t>(index) * img.channels * plane;
  for (int c = 0; c < img.channels; ++c) {
    float* dst = base + c * plane;
    const float m = norm.mean[static_cast<size_t>(c)];
    for (size_t i = 0; i < plane; ++i) {
      dst[i] = (img.pixels[i * img.channels + c] - m) * norm.scale;
    }
  }
}

Tensor to_tensor(const Image& img, const PixelNorm& norm) {
  Tensor t({1, img.channels, img.height, img.width});
  write_tensor(img, norm, t, 0);
  return t;
}

Image load_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
    throw DataError("cannot read PNG '" + path.string() + "': " + png.message);
  }
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&png);
    throw DataError("cannot decode PNG '" + path.string() + "': " + png.message);
  }
  Image img(static_cast<int>(png.width), static_cast<int>(png.height), color ? 3 : 1);
  std::transform(buf.begin(), buf.end(), img.pixels.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v); });
  return img;
}

void save_png(const Image& img, const std::filesystem::path& path) {
  if (img.empty() || (img.channels != 1 && img.channels != 3)) {
    throw UsageError("save_png needs a 1- or 3-channel image");
  }
  std::vector<std::uint8_t> buf(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), buf.begin(), [](float v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  });
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  if (!png_image_write_to_file(&png, tmp.string().c_str(), 0, buf.data(), 0, nullptr)) {
    throw DataError("cannot write PNG '" + path.string() + "': " + png.message);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace rpn2t
