#include "deepnotch/io/image.hpp"

#include <algorithm>
#include <string>

#include "deepnotch/errors.hpp"

namespace deepnotch {

namespace {

std::string dims_str(int h, int w, int c) {
  return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
}

void check_dims(int h, int w, int c) {
  if (h < Image::kMinSide || w < Image::kMinSide || (c != 1 && c != 3)) {
    throw DimensionError("invalid image dimensions " + dims_str(h, w, c) + " (need H,W >= 8 and 1 or 3 channels)");
  }
}

}  // namespace

Image::Image(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width, channels);
  pixels_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image::Image(int height, int width, int channels, std::vector<float> pixels)
    : height_(height), width_(width), channels_(channels), pixels_(std::move(pixels)) {
  check_dims(height, width, channels);
  if (pixels_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw ContractError("image " + dims_str(height, width, channels) + " given " + std::to_string(pixels_.size()) +
                        " values");
  }
}

std::size_t Image::clamp() {
  std::size_t n = 0;
  for (auto& v : pixels_) {
    if (v < 0.0f) {
      v = 0.0f;
      ++n;
    } else if (v > 1.0f) {
      v = 1.0f;
      ++n;
    } else if (v != v) {
      v = 0.0f;
      ++n;
    }
  }
  return n;
}

std::vector<float> Image::channel(int c) const {
  std::vector<float> out(static_cast<std::size_t>(height_) * width_);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pixels_[i * channels_ + c];
  return out;
}

void Image::set_channel(int c, std::span<const float> plane) {
  if (plane.size() != static_cast<std::size_t>(height_) * width_) throw ContractError("set_channel: plane size mismatch");
  for (std::size_t i = 0; i < plane.size(); ++i) pixels_[i * channels_ + c] = plane[i];
}

void require_same_dims(const Image& a, const Image& b, const char* what) {
  if (!a.same_dims(b)) {
    throw ContractError(std::string(what) + ": image dimensions differ (" +
                        dims_str(a.height(), a.width(), a.channels()) + " vs " +
                        dims_str(b.height(), b.width(), b.channels()) + ")");
  }
}

nn::Tensor image_to_tensor(const Image& img) { return images_to_tensor(std::span<const Image>(&img, 1)); }

nn::Tensor images_to_tensor(std::span<const Image> imgs) {
  if (imgs.empty()) throw ContractError("images_to_tensor: empty batch");
  const int H = imgs[0].height(), W = imgs[0].width(), C = imgs[0].channels();
  nn::Tensor t({static_cast<int>(imgs.size()), C, H, W});
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (std::size_t n = 0; n < imgs.size(); ++n) {
    require_same_dims(imgs[0], imgs[n], "images_to_tensor");
    const auto px = imgs[n].pixels();
    float* dst = t.ptr() + n * C * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      for (int c = 0; c < C; ++c) dst[c * plane + p] = px[p * C + c];
    }
  }
  return t;
}

Image tensor_to_image(const nn::Tensor& t, int index) {
  if (t.rank() != 4 || index < 0 || index >= t.dim(0)) {
    throw ContractError("tensor_to_image: bad tensor " + nn::shape_str(t.shape()) + " for index " +
                        std::to_string(index));
  }
  const int C = t.dim(1), H = t.dim(2), W = t.dim(3);
  Image img(H, W, C);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const float* src = t.ptr() + static_cast<std::size_t>(index) * C * plane;
  auto px = img.pixels();
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < C; ++c) px[p * C + c] = src[c * plane + p];
  }
  return img;
}

}  // namespace deepnotch
