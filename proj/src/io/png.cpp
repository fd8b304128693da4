#include "deepnotch/io/png.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "deepnotch/errors.hpp"

namespace deepnotch::io {

std::uint8_t quantize(float v) {
  if (!(v > 0.0f)) return 0;
  if (v >= 1.0f) return 255;
  return static_cast<std::uint8_t>(std::lround(v * 255.0f));
}

Image load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw CodecError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  const auto fmt = img.format;
  const char* reject = nullptr;
  if (fmt & PNG_FORMAT_FLAG_COLORMAP) reject = "palette images are not supported";
  else if (fmt & PNG_FORMAT_FLAG_LINEAR) reject = "16-bit images are not supported";
  else if (fmt & PNG_FORMAT_FLAG_ALPHA) reject = "images with alpha are not supported";
  if (reject) {
    png_image_free(&img);
    throw CodecError(path.string() + ": " + reject);
  }
  const int channels = (fmt & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
  img.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int H = static_cast<int>(img.height), W = static_cast<int>(img.width);
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw CodecError("cannot decode PNG " + path.string() + ": " + msg);
  }
  std::vector<float> px(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) px[i] = static_cast<float>(buf[i]) / 255.0f;
  return Image(H, W, channels, std::move(px));
}

void save_image(const Image& img, const std::filesystem::path& path) {
  if (img.empty()) throw ContractError("save_image: empty image");
  png_image out;
  std::memset(&out, 0, sizeof out);
  out.version = PNG_IMAGE_VERSION;
  out.width = static_cast<png_uint_32>(img.width());
  out.height = static_cast<png_uint_32>(img.height());
  out.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buf(img.size());
  const auto px = img.pixels();
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = quantize(px[i]);
  if (!png_image_write_to_file(&out, path.c_str(), 0, buf.data(), 0, nullptr)) {
    const std::string msg = out.message;
    png_image_free(&out);
    throw IoError("cannot write PNG " + path.string() + ": " + msg);
  }
}

}  // namespace deepnotch::io
