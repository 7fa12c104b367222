#include "wscod/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <png.h>
#include <sodium.h>

namespace wscod {
namespace {

Bytes write_png(const std::uint8_t* pixels, int width, int height, png_uint_32 format) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels, 0, nullptr)) {
    throw std::runtime_error(std::string("png encode: ") + image.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels, 0, nullptr)) {
    throw std::runtime_error(std::string("png encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

struct DecodedPng {
  int width = 0;
  int height = 0;
  Bytes pixels;
};

DecodedPng read_png(std::span<const std::uint8_t> png, png_uint_32 format) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, png.data(), png.size())) {
    throw DecodeError(std::string("png decode: ") + image.message);
  }
  image.format = format;
  DecodedPng out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw DecodeError(std::string("png decode: ") + image.message);
  }
  return out;
}

}  // namespace

Bytes encode_mask_png(const BinaryMask& mask) {
  Bytes gray(static_cast<std::size_t>(mask.size()));
  for (Eigen::Index i = 0; i < mask.size(); ++i) gray[i] = mask.data()[i] ? 255 : 0;
  return write_png(gray.data(), static_cast<int>(mask.cols()), static_cast<int>(mask.rows()),
                   PNG_FORMAT_GRAY);
}

BinaryMask decode_mask_png(std::span<const std::uint8_t> png) {
  const auto decoded = read_png(png, PNG_FORMAT_GRAY);
  BinaryMask mask(decoded.height, decoded.width);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = decoded.pixels[i] >= 128;
  return mask;
}

Bytes encode_image_png(const ImageBuffer& image) {
  return write_png(image.data().data(), image.width(), image.height(), PNG_FORMAT_RGB);
}

ImageBuffer decode_image_png(std::span<const std::uint8_t> png) {
  auto decoded = read_png(png, PNG_FORMAT_RGB);
  return ImageBuffer(decoded.width, decoded.height, std::move(decoded.pixels));
}

GrayMap decode_gray_png(std::span<const std::uint8_t> png) {
  const auto decoded = read_png(png, PNG_FORMAT_GRAY);
  GrayMap map(decoded.height, decoded.width);
  for (Eigen::Index i = 0; i < map.size(); ++i) map.data()[i] = decoded.pixels[i] / 255.0;
  return map;
}

Bytes encode_gray_png(const GrayMap& map) {
  Bytes gray(static_cast<std::size_t>(map.size()));
  for (Eigen::Index i = 0; i < map.size(); ++i) {
    gray[i] = static_cast<std::uint8_t>(std::lround(std::clamp(map.data()[i], 0.0, 1.0) * 255.0));
  }
  return write_png(gray.data(), static_cast<int>(map.cols()), static_cast<int>(map.rows()),
                   PNG_FORMAT_GRAY);
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  constexpr int variant = sodium_base64_VARIANT_ORIGINAL;
  std::string out(sodium_base64_encoded_len(bytes.size(), variant), '\0');
  sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(), variant);
  out.resize(std::strlen(out.c_str()));
  return out;
}

Bytes base64_decode(std::string_view text) {
  Bytes out(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0) {
    throw DecodeError("invalid base64 payload");
  }
  out.resize(len);
  return out;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

namespace {
template <typename F>
auto decode_file(const std::filesystem::path& path, F&& decode) {
  const auto bytes = read_file(path);
  try {
    return decode(bytes);
  } catch (const DecodeError& e) {
    throw DecodeError(path.string() + ": " + e.what());
  }
}
}  // namespace

BinaryMask read_mask(const std::filesystem::path& path) {
  return decode_file(path, [](const Bytes& b) { return decode_mask_png(b); });
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  write_file(path, encode_mask_png(mask));
}

ImageBuffer read_image(const std::filesystem::path& path) {
  return decode_file(path, [](const Bytes& b) { return decode_image_png(b); });
}

void write_image(const std::filesystem::path& path, const ImageBuffer& image) {
  write_file(path, encode_image_png(image));
}

GrayMap read_gray(const std::filesystem::path& path) {
  return decode_file(path, [](const Bytes& b) { return decode_gray_png(b); });
}

}  // namespace wscod
