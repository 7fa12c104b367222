#include "wscod/losses.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace wscod {
namespace {

template <typename Scalar>
GrayMapT<Scalar> clamp_probabilities(const GrayMapT<Scalar>& pred) {
  const auto lo = static_cast<Scalar>(kLossEpsilon);
  return pred.max(lo).min(Scalar(1) - lo);
}

}  // namespace

void AnnotatedSet::validate(Eigen::Index rows, Eigen::Index cols) const {
  if (indices.empty()) throw PreconditionError("annotated set is empty");
  if (indices.size() != labels.size()) throw PreconditionError("annotated set: label count mismatch");
  std::unordered_set<Eigen::Index> seen;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= rows * cols) {
      throw PreconditionError("annotated set: index " + std::to_string(indices[i]) + " out of bounds");
    }
    if (!seen.insert(indices[i]).second) {
      throw PreconditionError("annotated set: duplicate index " + std::to_string(indices[i]));
    }
    if (labels[i] > 1) throw PreconditionError("annotated set: label must be 0 or 1");
  }
}

AnnotatedSet AnnotatedSet::all_pixels(const BinaryMask& gt) {
  AnnotatedSet set;
  set.indices.reserve(static_cast<std::size_t>(gt.size()));
  for (Eigen::Index i = 0; i < gt.size(); ++i) {
    set.indices.push_back(i);
    set.labels.push_back(gt.data()[i] ? 1 : 0);
  }
  return set;
}

AnnotatedSet AnnotatedSet::from_points(const PointSet& points, const BinaryMask& gt) {
  require_points_in_image(points, static_cast<int>(gt.cols()), static_cast<int>(gt.rows()));
  AnnotatedSet set;
  for (const auto& p : points) {
    const Eigen::Index idx = static_cast<Eigen::Index>(p.y) * gt.cols() + p.x;
    if (std::find(set.indices.begin(), set.indices.end(), idx) != set.indices.end()) continue;
    set.indices.push_back(idx);
    set.labels.push_back(gt(p.y, p.x) ? 1 : 0);
  }
  return set;
}

template <typename Scalar>
LossTerm<Scalar> bce_loss(const GrayMapT<Scalar>& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt, "bce_loss");
  const GrayMapT<Scalar> p = clamp_probabilities(pred);
  const GrayMapT<Scalar> g = gt.template cast<Scalar>();
  LossTerm<Scalar> out;
  out.value = -(g * p.log() + (Scalar(1) - g) * (Scalar(1) - p).log()).sum();
  out.gradient = -(g / p - (Scalar(1) - g) / (Scalar(1) - p));
  return out;
}

template <typename Scalar>
LossTerm<Scalar> pbce_loss(const GrayMapT<Scalar>& pred, const AnnotatedSet& annotated) {
  annotated.validate(pred.rows(), pred.cols());
  const GrayMapT<Scalar> p = clamp_probabilities(pred);
  const Scalar n = static_cast<Scalar>(annotated.indices.size());
  LossTerm<Scalar> out;
  out.gradient = GrayMapT<Scalar>::Zero(pred.rows(), pred.cols());
  Scalar sum = 0;
  for (std::size_t k = 0; k < annotated.indices.size(); ++k) {
    const Eigen::Index i = annotated.indices[k];
    const Scalar y = p.data()[i];
    if (annotated.labels[k] != 0) {
      sum += std::log(y);
      out.gradient.data()[i] = -Scalar(1) / (n * y);
    } else {
      sum += std::log(Scalar(1) - y);
      out.gradient.data()[i] = Scalar(1) / (n * (Scalar(1) - y));
    }
  }
  out.value = -sum / n;
  return out;
}

template <typename Scalar>
LossTerm<Scalar> iou_loss(const GrayMapT<Scalar>& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt, "iou_loss");
  const GrayMapT<Scalar> g = gt.template cast<Scalar>();
  const Scalar inter = (pred * g).sum();
  const Scalar uni = (pred + g - pred * g).sum() + static_cast<Scalar>(kLossEpsilon);
  LossTerm<Scalar> out;
  out.value = Scalar(1) - inter / uni;
  // d(inter)/dp = g, d(union)/dp = 1 - g
  out.gradient = -(g * uni - (Scalar(1) - g) * inter) / (uni * uni);
  return out;
}

template <typename Scalar>
LossValue<Scalar> total_loss(const GrayMapT<Scalar>& pred, const BinaryMask& gt,
                             const AnnotatedSet& annotated) {
  const auto bce = bce_loss(pred, gt);
  const auto pbce = pbce_loss(pred, annotated);
  const auto iou = iou_loss(pred, gt);
  LossValue<Scalar> out;
  out.bce = bce.value;
  out.pbce = pbce.value;
  out.iou = iou.value;
  out.total = bce.value + pbce.value + iou.value;
  out.gradient = bce.gradient + pbce.gradient + iou.gradient;
  return out;
}

template LossTerm<float> bce_loss(const GrayMapT<float>&, const BinaryMask&);
template LossTerm<double> bce_loss(const GrayMapT<double>&, const BinaryMask&);
template LossTerm<float> pbce_loss(const GrayMapT<float>&, const AnnotatedSet&);
template LossTerm<double> pbce_loss(const GrayMapT<double>&, const AnnotatedSet&);
template LossTerm<float> iou_loss(const GrayMapT<float>&, const BinaryMask&);
template LossTerm<double> iou_loss(const GrayMapT<double>&, const BinaryMask&);
template LossValue<float> total_loss(const GrayMapT<float>&, const BinaryMask&, const AnnotatedSet&);
template LossValue<double> total_loss(const GrayMapT<double>&, const BinaryMask&,
                                      const AnnotatedSet&);

}  // namespace wscod
