#include "wscod/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace wscod {

ImageBuffer::ImageBuffer(int width, int height)
    : ImageBuffer(width, height,
                  std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                            std::max(height, 0) * 3)) {}

ImageBuffer::ImageBuffer(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 1 || height < 1) {
    throw PreconditionError("image dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(width) * height * 3) {
    throw PreconditionError("image data length must be 3*W*H");
  }
}

Raster<double> ImageBuffer::channel(int c) const {
  Raster<double> out(height_, width_);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) out(y, x) = at(x, y, c);
  }
  return out;
}

void ImageBuffer::set_channel(int c, const Raster<double>& values) {
  require_same_shape(values, Raster<double>(height_, width_), "set_channel");
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::round(values(y, x)), 0.0, 255.0));
    }
  }
}

TextTag::TextTag(std::string tag) : tag_(std::move(tag)) {
  const bool blank = std::all_of(tag_.begin(), tag_.end(),
                                 [](unsigned char ch) { return std::isspace(ch) != 0; });
  if (blank) throw PreconditionError("text tag must be non-empty");
}

void PipelineParams::validate() const {
  auto unit = [](double v) { return v > 0.0 && v <= 1.0; };
  if (!unit(alpha)) throw PreconditionError("alpha must lie in (0, 1]");
  if (!unit(beta)) throw PreconditionError("beta must lie in (0, 1]");
  if (!unit(delta)) throw PreconditionError("delta must lie in (0, 1]");
  if (!(sigma > 0.0)) throw PreconditionError("sigma must be positive");
  const auto first = prompt_template.find("{text}");
  if (first == std::string::npos || prompt_template.find("{text}", first + 1) != std::string::npos) {
    throw PreconditionError("prompt template must contain exactly one {text} slot");
  }
}

std::string PipelineParams::format_prompt(const TextTag& tag) const {
  std::string out = prompt_template;
  const auto pos = out.find("{text}");
  if (pos == std::string::npos) throw PreconditionError("prompt template has no {text} slot");
  out.replace(pos, 6, tag.str());
  return out;
}

bool valid_box(const BBox& b, int width, int height) {
  return 0 <= b.x_min && b.x_min <= b.x_max && b.x_max < width && 0 <= b.y_min &&
         b.y_min <= b.y_max && b.y_max < height;
}

void require_valid_box(const BBox& b, int width, int height) {
  if (!valid_box(b, width, height)) {
    throw PreconditionError("box (" + std::to_string(b.x_min) + "," + std::to_string(b.y_min) +
                            "," + std::to_string(b.x_max) + "," + std::to_string(b.y_max) +
                            ") invalid for " + std::to_string(width) + "x" +
                            std::to_string(height));
  }
}

bool point_in_image(const Point& p, int width, int height) {
  return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height;
}

void require_points_in_image(const PointSet& points, int width, int height) {
  if (points.empty()) throw PreconditionError("point set is empty");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!point_in_image(points[i], width, height)) {
      throw PreconditionError("point " + std::to_string(i) + " (" + std::to_string(points[i].x) +
                              "," + std::to_string(points[i].y) + ") outside " +
                              std::to_string(width) + "x" + std::to_string(height) + " image");
    }
  }
}

double box_area_fraction(const BBox& box, int width, int height) {
  require_valid_box(box, width, height);
  return static_cast<double>(box.width()) * box.height() /
         (static_cast<double>(width) * height);
}

bool point_in_box(const Point& p, const BBox& b) {
  return b.x_min <= p.x && p.x <= b.x_max && b.y_min <= p.y && p.y <= b.y_max;
}

double mask_area_fraction(const BinaryMask& mask) {
  if (mask.size() == 0) return 0.0;
  return static_cast<double>(mask.count()) / static_cast<double>(mask.size());
}

BinaryMask empty_mask(int width, int height) { return BinaryMask::Constant(height, width, false); }

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b, "mask_iou");
  const auto inter = (a && b).count();
  const auto uni = (a || b).count();
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace wscod
