#pragma once

#include <cstdint>
#include <vector>

#include "wscod/core.hpp"

namespace wscod {

inline constexpr double kLossEpsilon = 1e-7;

/// A loss value with its gradient with respect to every prediction pixel.
template <typename Scalar>
struct LossTerm {
  Scalar value = 0;
  GrayMapT<Scalar> gradient;
};

/// Labelled subset of pixels, addressed by row-major index.
struct AnnotatedSet {
  std::vector<Eigen::Index> indices;
  std::vector<std::uint8_t> labels;  // 0 or 1, parallel to indices

  void validate(Eigen::Index rows, Eigen::Index cols) const;
  static AnnotatedSet all_pixels(const BinaryMask& gt);
  static AnnotatedSet from_points(const PointSet& points, const BinaryMask& gt);
};

/// Summed (not averaged) pixel-wise binary cross-entropy.
template <typename Scalar>
LossTerm<Scalar> bce_loss(const GrayMapT<Scalar>& pred, const BinaryMask& gt);

/// Cross-entropy over the annotated pixels only, averaged over the set size.
template <typename Scalar>
LossTerm<Scalar> pbce_loss(const GrayMapT<Scalar>& pred, const AnnotatedSet& annotated);

/// 1 - sum(p g) / sum(p + g - p g).
template <typename Scalar>
LossTerm<Scalar> iou_loss(const GrayMapT<Scalar>& pred, const BinaryMask& gt);

template <typename Scalar>
struct LossValue {
  Scalar bce = 0;
  Scalar pbce = 0;
  Scalar iou = 0;
  Scalar total = 0;
  GrayMapT<Scalar> gradient;
};

template <typename Scalar>
LossValue<Scalar> total_loss(const GrayMapT<Scalar>& pred, const BinaryMask& gt,
                             const AnnotatedSet& annotated);

extern template LossTerm<float> bce_loss(const GrayMapT<float>&, const BinaryMask&);
extern template LossTerm<double> bce_loss(const GrayMapT<double>&, const BinaryMask&);
extern template LossTerm<float> pbce_loss(const GrayMapT<float>&, const AnnotatedSet&);
extern template LossTerm<double> pbce_loss(const GrayMapT<double>&, const AnnotatedSet&);
extern template LossTerm<float> iou_loss(const GrayMapT<float>&, const BinaryMask&);
extern template LossTerm<double> iou_loss(const GrayMapT<double>&, const BinaryMask&);
extern template LossValue<float> total_loss(const GrayMapT<float>&, const BinaryMask&,
                                            const AnnotatedSet&);
extern template LossValue<double> total_loss(const GrayMapT<double>&, const BinaryMask&,
                                             const AnnotatedSet&);

}  // namespace wscod
