#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wscod/core.hpp"

namespace wscod {

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Bytes = std::vector<std::uint8_t>;

// Masks are 8-bit grayscale PNG, 255 = foreground, 0 = background.
Bytes encode_mask_png(const BinaryMask& mask);
BinaryMask decode_mask_png(std::span<const std::uint8_t> png);

Bytes encode_image_png(const ImageBuffer& image);
ImageBuffer decode_image_png(std::span<const std::uint8_t> png);

/// Any PNG flattened to 8-bit grayscale and scaled by 1/255.
GrayMap decode_gray_png(std::span<const std::uint8_t> png);
Bytes encode_gray_png(const GrayMap& map);

std::string base64_encode(std::span<const std::uint8_t> bytes);
Bytes base64_decode(std::string_view text);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

BinaryMask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);
ImageBuffer read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const ImageBuffer& image);
GrayMap read_gray(const std::filesystem::path& path);

}  // namespace wscod
