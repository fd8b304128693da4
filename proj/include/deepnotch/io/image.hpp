#pragma once

#include <span>
#include <vector>

#include "deepnotch/nn/tensor.hpp"

namespace deepnotch {

// H x W x C raster, row-major and channel-interleaved, intensities in [0, 1].
class Image {
 public:
  static constexpr int kMinSide = 8;

  Image() = default;
  // Throws DimensionError unless height, width >= kMinSide and channels is 1 or 3.
  Image(int height, int width, int channels, float fill = 0.0f);
  Image(int height, int width, int channels, std::vector<float> pixels);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }
  bool same_dims(const Image& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }

  float& at(int y, int x, int c) { return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c]; }
  float at(int y, int x, int c) const {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  std::span<float> pixels() { return pixels_; }
  std::span<const float> pixels() const { return pixels_; }

  // Clips every intensity into [0, 1]; returns the number of clipped values.
  std::size_t clamp();

  // Single-channel plane c as a row-major H*W vector.
  std::vector<float> channel(int c) const;
  void set_channel(int c, std::span<const float> plane);

 private:
  int height_ = 0, width_ = 0, channels_ = 0;
  std::vector<float> pixels_;
};

// Throws ContractError describing both sizes when dims differ.
void require_same_dims(const Image& a, const Image& b, const char* what);

// [1, C, H, W] tensor view (copy) of an image and back. The inverse does not
// clamp; callers decide.
nn::Tensor image_to_tensor(const Image& img);
nn::Tensor images_to_tensor(std::span<const Image> imgs);
Image tensor_to_image(const nn::Tensor& t, int index = 0);

}  // namespace deepnotch
