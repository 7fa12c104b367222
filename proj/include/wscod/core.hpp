#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace wscod {

/// Row-major raster; rows index y (top to bottom), columns index x.
template <typename Scalar>
using Raster = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Hard foreground/background mask.
using BinaryMask = Raster<bool>;

/// Soft prediction map, values in [0, 1].
template <typename Scalar>
using GrayMapT = Raster<Scalar>;
using GrayMap = GrayMapT<double>;

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// 8-bit RGB image stored as interleaved row-major triples.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height);
  ImageBuffer(int width, int height, std::vector<std::uint8_t> data);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }

  std::uint8_t& at(int x, int y, int c) { return data_[index(x, y, c)]; }
  std::uint8_t at(int x, int y, int c) const { return data_[index(x, y, c)]; }

  /// One colour plane as a real-valued raster (0..255).
  Raster<double> channel(int c) const;
  void set_channel(int c, const Raster<double>& values);

  bool operator==(const ImageBuffer&) const = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3 + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

struct Point {
  int x = 0;
  int y = 0;
  bool operator==(const Point&) const = default;
};

/// Pixel-index box, inclusive on all edges.
struct BBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  int width() const { return x_max - x_min + 1; }
  int height() const { return y_max - y_min + 1; }
  bool operator==(const BBox&) const = default;
};

using PointSet = std::vector<Point>;

/// Category tag, non-empty after trimming.
class TextTag {
 public:
  explicit TextTag(std::string tag);
  const std::string& str() const { return tag_; }
  bool operator==(const TextTag&) const = default;

 private:
  std::string tag_;
};

struct Sample {
  std::string stem;
  std::string image_path;
  PointSet points;
  TextTag text{"object"};
  std::string gt_path;     // empty when absent
  std::string scene_path;  // synthetic scene description, empty when absent
};

struct CandidatePair {
  BinaryMask point_mask;
  BinaryMask text_mask;
};

struct PipelineParams {
  double alpha = 0.95;   // box coverage ceiling
  double beta = 0.20;    // regeneration half-extent, fraction of W/H
  double delta = 0.80;   // mask erasure ceiling
  double sigma = 50.0;   // reverse-blur std-dev, pixels
  std::string prompt_template = "A {text}";

  void validate() const;
  std::string format_prompt(const TextTag& tag) const;
  bool operator==(const PipelineParams&) const = default;
};

bool valid_box(const BBox& box, int width, int height);
void require_valid_box(const BBox& box, int width, int height);
bool point_in_image(const Point& p, int width, int height);
void require_points_in_image(const PointSet& points, int width, int height);

double box_area_fraction(const BBox& box, int width, int height);
bool point_in_box(const Point& p, const BBox& box);
double mask_area_fraction(const BinaryMask& mask);

BinaryMask empty_mask(int width, int height);

/// Intersection over union of two masks; 1 when both are empty.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(what) + ": " + std::to_string(a.cols()) + "x" +
                            std::to_string(a.rows()) + " vs " + std::to_string(b.cols()) +
                            "x" + std::to_string(b.rows()));
  }
}

}  // namespace wscod
