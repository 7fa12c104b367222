#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "wscod/core.hpp"

namespace wscod {

struct DetectedBox {
  BBox box;
  double confidence = 1.0;
  bool operator==(const DetectedBox&) const = default;
};

/// Base class for every failure raised by a model backend.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PointSegmenter {
 public:
  virtual ~PointSegmenter() = default;
  virtual BinaryMask segment_point(const ImageBuffer& image, const Point& point) = 0;
};

class BoxSegmenter {
 public:
  virtual ~BoxSegmenter() = default;
  virtual BinaryMask segment_box(const ImageBuffer& image, const BBox& box) = 0;
};

class TextBoxDetector {
 public:
  virtual ~TextBoxDetector() = default;
  virtual std::vector<DetectedBox> detect(const ImageBuffer& image, const std::string& text) = 0;
};

class ImageTextScorer {
 public:
  virtual ~ImageTextScorer() = default;
  virtual double score(const ImageBuffer& image, const std::string& text) = 0;
};

/// The four model roles bundled for one session (or one synthetic scene).
struct Backends {
  std::shared_ptr<PointSegmenter> point_segmenter;
  std::shared_ptr<BoxSegmenter> box_segmenter;
  std::shared_ptr<TextBoxDetector> detector;
  std::shared_ptr<ImageTextScorer> scorer;
};

}  // namespace wscod
