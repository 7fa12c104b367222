#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "wscod/backends.hpp"
#include "wscod/core.hpp"

namespace wscod {

/// Box of half-extent beta*W by beta*H around the point, rounded and clamped.
BBox regenerate_box(const Point& point, int width, int height, double beta);

/// Bounding-box rectifier. Keeps detections that cover at most alpha of the image
/// and contain an annotated point, then adds a regenerated box for every point no
/// surviving box covers. Surviving detections come first (input order), then the
/// regenerated boxes (point order). Regenerated boxes that would exceed alpha are
/// shrunk towards their point.
std::vector<BBox> rectify_boxes(const std::vector<DetectedBox>& detections, const PointSet& points,
                                int width, int height, double alpha, double beta);

/// Per-point masks OR-merged into one image mask.
BinaryMask segment_point_path(const ImageBuffer& image, const PointSet& points,
                              PointSegmenter& segmenter);

/// Pixelwise OR of the box segmenter's output over every box.
BinaryMask segment_boxes(const ImageBuffer& image, const std::vector<BBox>& boxes,
                         BoxSegmenter& segmenter);

struct ErasureResult {
  BinaryMask mask;
  bool triggered = false;
  std::vector<BBox> regenerated;
};

/// Single pass: a mask covering at least delta of the image is replaced by the
/// re-segmentation of boxes regenerated around the annotated points.
ErasureResult mask_erasure(const BinaryMask& mask, const ImageBuffer& image, const PointSet& points,
                           double delta, double beta, BoxSegmenter& segmenter);

struct TextPathTrace {
  std::vector<DetectedBox> detected;
  std::vector<BBox> rectified;
  double raw_mask_fraction = 0.0;
  bool erasure_triggered = false;
  std::vector<BBox> erasure_boxes;
};

BinaryMask segment_text_path(const ImageBuffer& image, const PointSet& points, const TextTag& text,
                             TextBoxDetector& detector, BoxSegmenter& segmenter,
                             const PipelineParams& params, TextPathTrace* trace = nullptr);

/// Raised when one of the two candidate paths fails; names the path.
class CandidatePathError : public std::runtime_error {
 public:
  CandidatePathError(std::string path, const std::string& detail)
      : std::runtime_error(path + " path failed: " + detail), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

CandidatePair generate_candidates(const ImageBuffer& image, const PointSet& points,
                                  const TextTag& text, const Backends& backends,
                                  const PipelineParams& params, TextPathTrace* trace = nullptr);

}  // namespace wscod
