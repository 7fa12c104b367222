#include "wscod/pcg.hpp"

#include <algorithm>
#include <cmath>

namespace wscod {
namespace {

void merge_into(BinaryMask& acc, const BinaryMask& part, const char* what) {
  require_same_shape(acc, part, what);
  acc = acc || part;
}

// Trims the side that extends farther from the point until the box fits alpha.
BBox shrink_to_fraction(BBox box, const Point& p, int width, int height, double alpha) {
  const double area = static_cast<double>(width) * height;
  while (box.width() * static_cast<double>(box.height()) / area > alpha) {
    const int left = p.x - box.x_min;
    const int right = box.x_max - p.x;
    const int up = p.y - box.y_min;
    const int down = box.y_max - p.y;
    const int widest = std::max({left, right, up, down});
    if (widest == 0) break;
    if (widest == left) {
      ++box.x_min;
    } else if (widest == right) {
      --box.x_max;
    } else if (widest == up) {
      ++box.y_min;
    } else {
      --box.y_max;
    }
  }
  return box;
}

}  // namespace

BBox regenerate_box(const Point& p, int width, int height, double beta) {
  if (!point_in_image(p, width, height)) {
    throw PreconditionError("regenerate_box: point (" + std::to_string(p.x) + "," +
                            std::to_string(p.y) + ") outside image");
  }
  if (!(beta > 0.0 && beta <= 1.0)) throw PreconditionError("regenerate_box: beta not in (0, 1]");
  const double dx = beta * width;
  const double dy = beta * height;
  auto clamp_round = [](double v, int hi) {
    return static_cast<int>(std::clamp(std::round(v), 0.0, static_cast<double>(hi)));
  };
  return BBox{clamp_round(p.x - dx, width - 1), clamp_round(p.y - dy, height - 1),
              clamp_round(p.x + dx, width - 1), clamp_round(p.y + dy, height - 1)};
}

std::vector<BBox> rectify_boxes(const std::vector<DetectedBox>& detections, const PointSet& points,
                                int width, int height, double alpha, double beta) {
  if (points.empty()) throw PreconditionError("rectify_boxes: no annotated points");
  require_points_in_image(points, width, height);

  std::vector<BBox> out;
  for (const auto& det : detections) {
    if (box_area_fraction(det.box, width, height) > alpha) continue;
    const bool has_point = std::any_of(points.begin(), points.end(),
                                       [&](const Point& p) { return point_in_box(p, det.box); });
    if (has_point) out.push_back(det.box);
  }

  const std::size_t survivors = out.size();
  for (const auto& p : points) {
    const bool covered = std::any_of(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(survivors),
                                     [&](const BBox& b) { return point_in_box(p, b); });
    if (!covered) {
      out.push_back(shrink_to_fraction(regenerate_box(p, width, height, beta), p, width, height, alpha));
    }
  }
  return out;
}

BinaryMask segment_point_path(const ImageBuffer& image, const PointSet& points,
                              PointSegmenter& segmenter) {
  require_points_in_image(points, image.width(), image.height());
  BinaryMask merged = empty_mask(image.width(), image.height());
  for (std::size_t i = 0; i < points.size(); ++i) {
    try {
      merge_into(merged, segmenter.segment_point(image, points[i]), "point segmenter output");
    } catch (const std::exception& e) {
      throw BackendError("point " + std::to_string(i) + ": " + e.what());
    }
  }
  return merged;
}

BinaryMask segment_boxes(const ImageBuffer& image, const std::vector<BBox>& boxes,
                         BoxSegmenter& segmenter) {
  BinaryMask merged = empty_mask(image.width(), image.height());
  for (const auto& box : boxes) {
    merge_into(merged, segmenter.segment_box(image, box), "box segmenter output");
  }
  return merged;
}

ErasureResult mask_erasure(const BinaryMask& mask, const ImageBuffer& image, const PointSet& points,
                           double delta, double beta, BoxSegmenter& segmenter) {
  require_same_shape(mask, empty_mask(image.width(), image.height()), "mask_erasure");
  ErasureResult result;
  if (mask_area_fraction(mask) < delta) {
    result.mask = mask;
    return result;
  }
  result.triggered = true;
  for (const auto& p : points) {
    result.regenerated.push_back(regenerate_box(p, image.width(), image.height(), beta));
  }
  result.mask = segment_boxes(image, result.regenerated, segmenter);
  return result;
}

BinaryMask segment_text_path(const ImageBuffer& image, const PointSet& points, const TextTag& text,
                             TextBoxDetector& detector, BoxSegmenter& segmenter,
                             const PipelineParams& params, TextPathTrace* trace) {
  auto detected = detector.detect(image, text.str());
  for (const auto& d : detected) require_valid_box(d.box, image.width(), image.height());
  auto boxes = rectify_boxes(detected, points, image.width(), image.height(), params.alpha,
                             params.beta);
  const BinaryMask raw = segment_boxes(image, boxes, segmenter);
  auto erased = mask_erasure(raw, image, points, params.delta, params.beta, segmenter);
  if (trace != nullptr) {
    trace->detected = std::move(detected);
    trace->rectified = std::move(boxes);
    trace->raw_mask_fraction = mask_area_fraction(raw);
    trace->erasure_triggered = erased.triggered;
    trace->erasure_boxes = std::move(erased.regenerated);
  }
  return std::move(erased.mask);
}

CandidatePair generate_candidates(const ImageBuffer& image, const PointSet& points,
                                  const TextTag& text, const Backends& backends,
                                  const PipelineParams& params, TextPathTrace* trace) {
  params.validate();
  require_points_in_image(points, image.width(), image.height());
  CandidatePair pair;
  try {
    pair.point_mask = segment_point_path(image, points, *backends.point_segmenter);
  } catch (const std::exception& e) {
    throw CandidatePathError("point", e.what());
  }
  try {
    pair.text_mask = segment_text_path(image, points, text, *backends.detector,
                                       *backends.box_segmenter, params, trace);
  } catch (const std::exception& e) {
    throw CandidatePathError("text", e.what());
  }
  return pair;
}

}  // namespace wscod
