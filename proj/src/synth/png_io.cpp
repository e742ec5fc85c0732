#include "dacdet/synth/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace dacdet::synth {

namespace {

png_uint_32 format_for(int channels) {
  if (channels == 1) return PNG_FORMAT_GRAY;
  if (channels == 3) return PNG_FORMAT_RGB;
  throw PngError("png: unsupported channel count " + std::to_string(channels));
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& image) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = format_for(image.channels);

  std::vector<png_byte> buffer(static_cast<std::size_t>(image.width) * image.height * image.channels);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < image.channels; ++c) {
        float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        buffer[(static_cast<std::size_t>(y) * image.width + x) * image.channels + c] =
            static_cast<png_byte>(std::lround(v * 255.0f));
      }
    }
  }
  if (!png_image_write_to_file(&png, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    std::string msg = png.message;
    png_image_free(&png);
    throw PngError("png: cannot write " + path.string() + ": " + msg);
  }
}

Image read_png(const std::filesystem::path& path, int channels) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    std::string msg = png.message;
    png_image_free(&png);
    throw PngError("png: cannot read " + path.string() + ": " + msg);
  }
  png.format = format_for(channels);
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr) || PNG_IMAGE_FAILED(png)) {
    std::string msg = png.message;
    png_image_free(&png);
    throw PngError("png: corrupt data in " + path.string() + ": " + msg);
  }
  Image image(channels, static_cast<int>(png.height), static_cast<int>(png.width));
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < channels; ++c) {
        image.at(c, y, x) =
            static_cast<float>(buffer[(static_cast<std::size_t>(y) * image.width + x) * channels + c]) / 255.0f;
      }
    }
  }
  png_image_free(&png);
  return image;
}

}  // namespace dacdet::synth
