#pragma once

#include <filesystem>
#include <stdexcept>

#include "dacdet/common/image.hpp"

namespace dacdet::synth {

class PngError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes 8 bits per channel (1 or 3 channels). Values are rounded to k/255.
void write_png(const std::filesystem::path& path, const Image& image);

/// Reads an 8-bit gray or RGB PNG into a planar image with values k/255.
Image read_png(const std::filesystem::path& path, int channels);

}  // namespace dacdet::synth
