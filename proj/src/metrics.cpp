#include "wscod/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wscod {
namespace {

template <typename Scalar>
constexpr Scalar kEps = std::numeric_limits<Scalar>::epsilon();

template <typename Scalar>
using Column = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

// Mean-and-spread score of one side (foreground or background) of the object term.
template <typename Scalar>
Scalar object_similarity(const Column<Scalar>& values) {
  const auto n = values.size();
  if (n == 0) return Scalar(0);
  const Scalar mean = values.mean();
  const Scalar sd =
      n > 1 ? std::sqrt((values - mean).square().sum() / static_cast<Scalar>(n - 1)) : Scalar(0);
  return Scalar(2) * mean / (mean * mean + Scalar(1) + sd + kEps<Scalar>);
}

template <typename Scalar>
Scalar object_term(const GrayMapT<Scalar>& pred, const BinaryMask& gt) {
  const auto fg_count = gt.count();
  Column<Scalar> fg(fg_count);
  Column<Scalar> bg(gt.size() - fg_count);
  Eigen::Index fi = 0;
  Eigen::Index bi = 0;
  for (Eigen::Index i = 0; i < gt.size(); ++i) {
    if (gt.data()[i]) {
      fg(fi++) = pred.data()[i];
    } else {
      bg(bi++) = Scalar(1) - pred.data()[i];
    }
  }
  const Scalar u = static_cast<Scalar>(fg_count) / static_cast<Scalar>(gt.size());
  return u * object_similarity(fg) + (Scalar(1) - u) * object_similarity(bg);
}

template <typename Scalar, typename PredBlock, typename GtBlock>
Scalar block_ssim(const PredBlock& pred, const GtBlock& gt) {
  const auto n = pred.size();
  if (n == 0) return Scalar(0);
  const Scalar mx = pred.mean();
  const Scalar my = gt.mean();
  Scalar sx = 0, sy = 0, sxy = 0;
  if (n > 1) {
    const Scalar denom = static_cast<Scalar>(n - 1);
    sx = (pred - mx).square().sum() / denom;
    sy = (gt - my).square().sum() / denom;
    sxy = ((pred - mx) * (gt - my)).sum() / denom;
  }
  const Scalar num = Scalar(4) * mx * my * sxy;
  const Scalar den = (mx * mx + my * my) * (sx + sy);
  if (num != Scalar(0)) return num / (den + kEps<Scalar>);
  return den == Scalar(0) ? Scalar(1) : Scalar(0);
}

template <typename Scalar>
Scalar region_term(const GrayMapT<Scalar>& pred, const BinaryMask& gt) {
  const Eigen::Index h = gt.rows();
  const Eigen::Index w = gt.cols();
  double sum_x = 0, sum_y = 0;
  const auto fg = gt.count();
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) {
      if (gt(r, c)) {
        sum_x += static_cast<double>(c);
        sum_y += static_cast<double>(r);
      }
    }
  }
  // Split point = rounded centroid + 1, i.e. the width/height of the left/top parts.
  const Eigen::Index x = static_cast<Eigen::Index>(std::round(sum_x / static_cast<double>(fg))) + 1;
  const Eigen::Index y = static_cast<Eigen::Index>(std::round(sum_y / static_cast<double>(fg))) + 1;

  const GrayMapT<Scalar> g = gt.template cast<Scalar>();
  const Scalar area = static_cast<Scalar>(h * w);
  const Scalar w1 = static_cast<Scalar>(x * y) / area;
  const Scalar w2 = static_cast<Scalar>(y * (w - x)) / area;
  const Scalar w3 = static_cast<Scalar>((h - y) * x) / area;
  const Scalar w4 = Scalar(1) - w1 - w2 - w3;

  return w1 * block_ssim<Scalar>(pred.topLeftCorner(y, x), g.topLeftCorner(y, x)) +
         w2 * block_ssim<Scalar>(pred.topRightCorner(y, w - x), g.topRightCorner(y, w - x)) +
         w3 * block_ssim<Scalar>(pred.bottomLeftCorner(h - y, x), g.bottomLeftCorner(h - y, x)) +
         w4 * block_ssim<Scalar>(pred.bottomRightCorner(h - y, w - x),
                                 g.bottomRightCorner(h - y, w - x));
}

template <typename Scalar>
Raster<bool> binarize(const GrayMapT<Scalar>& pred, Scalar threshold) {
  return pred >= threshold;
}

template <typename Scalar>
Column<Scalar> dependency_kernel(const MetricOptions& options) {
  const int radius = options.wf_window / 2;
  Column<Scalar> g(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k) {
    g(k + radius) = static_cast<Scalar>(std::exp(-(k * k) / (2.0 * options.wf_sigma * options.wf_sigma)));
  }
  return g / g.sum();
}

// Zero-padded separable correlation.
template <typename Scalar>
GrayMapT<Scalar> filter_zero_padded(const GrayMapT<Scalar>& in, const Column<Scalar>& g) {
  const Eigen::Index radius = g.size() / 2;
  const Eigen::Index h = in.rows();
  const Eigen::Index w = in.cols();
  GrayMapT<Scalar> tmp = GrayMapT<Scalar>::Zero(h, w);
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) {
      Scalar acc = 0;
      for (Eigen::Index k = -radius; k <= radius; ++k) {
        const Eigen::Index cc = c + k;
        if (cc >= 0 && cc < w) acc += g(k + radius) * in(r, cc);
      }
      tmp(r, c) = acc;
    }
  }
  GrayMapT<Scalar> out = GrayMapT<Scalar>::Zero(h, w);
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) {
      Scalar acc = 0;
      for (Eigen::Index k = -radius; k <= radius; ++k) {
        const Eigen::Index rr = r + k;
        if (rr >= 0 && rr < h) acc += g(k + radius) * tmp(rr, c);
      }
      out(r, c) = acc;
    }
  }
  return out;
}

}  // namespace

ThresholdCounts& ThresholdCounts::operator+=(const ThresholdCounts& other) {
  for (int t = 0; t < kThresholds; ++t) {
    true_positive[t] += other.true_positive[t];
    predicted_positive[t] += other.predicted_positive[t];
  }
  gt_positive += other.gt_positive;
  return *this;
}

PRCurve pr_curve(const ThresholdCounts& counts) {
  PRCurve curve;
  for (int t = 0; t < kThresholds; ++t) {
    const auto tp = static_cast<double>(counts.true_positive[t]);
    curve.precision[t] = counts.predicted_positive[t] > 0 ? tp / counts.predicted_positive[t] : 0.0;
    curve.recall[t] = counts.gt_positive > 0 ? tp / counts.gt_positive : 0.0;
  }
  return curve;
}

template <typename Scalar>
int quantize_level(Scalar value) {
  return static_cast<int>(std::lround(std::clamp<double>(value, 0.0, 1.0) * 255.0));
}

template <typename Scalar>
Scalar adaptive_threshold(const GrayMapT<Scalar>& pred) {
  return std::min(Scalar(2) * pred.mean(), Scalar(1));
}

template <typename Scalar>
Scalar f_beta(Scalar precision, Scalar recall, Scalar beta2) {
  const Scalar den = beta2 * precision + recall;
  return den > Scalar(0) ? (Scalar(1) + beta2) * precision * recall / den : Scalar(0);
}

template <typename Scalar>
Scalar mae(const GrayMapT<Scalar>& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt, "mae");
  return (pred - gt.template cast<Scalar>()).abs().mean();
}

template <typename Scalar>
Scalar s_measure(const GrayMapT<Scalar>& pred, const BinaryMask& gt, Scalar alpha) {
  require_same_shape(pred, gt, "s_measure");
  const auto fg = gt.count();
  if (fg == 0) return Scalar(1) - pred.mean();
  if (fg == gt.size()) return pred.mean();
  const Scalar score = alpha * object_term(pred, gt) + (Scalar(1) - alpha) * region_term(pred, gt);
  return std::max(score, Scalar(0));
}

template <typename Scalar>
Scalar e_measure_adaptive(const GrayMapT<Scalar>& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt, "e_measure");
  const Raster<bool> bin = binarize(pred, adaptive_threshold(pred));
  const auto n = gt.size();
  const auto gt_fg = gt.count();
  const auto fg_fg = (bin && gt).count();
  const auto pred_fg = bin.count();
  const auto fg_bg = pred_fg - fg_fg;
  const auto bg_fg = gt_fg - fg_fg;
  const auto bg_bg = n - pred_fg - bg_fg;

  Scalar sum = 0;
  if (gt_fg == 0) {
    sum = static_cast<Scalar>(n - pred_fg);
  } else if (gt_fg == n) {
    sum = static_cast<Scalar>(pred_fg);
  } else {
    const Scalar mp = static_cast<Scalar>(pred_fg) / static_cast<Scalar>(n);
    const Scalar mg = static_cast<Scalar>(gt_fg) / static_cast<Scalar>(n);
    auto enhanced = [](Scalar dp, Scalar dg) {
      const Scalar align = Scalar(2) * dp * dg / (dp * dp + dg * dg + kEps<Scalar>);
      return (align + Scalar(1)) * (align + Scalar(1)) / Scalar(4);
    };
    sum = enhanced(1 - mp, 1 - mg) * static_cast<Scalar>(fg_fg) +
          enhanced(1 - mp, -mg) * static_cast<Scalar>(fg_bg) +
          enhanced(-mp, 1 - mg) * static_cast<Scalar>(bg_fg) +
          enhanced(-mp, -mg) * static_cast<Scalar>(bg_bg);
  }
  return sum / static_cast<Scalar>(n);
}

template <typename Scalar>
FMeasures<Scalar> f_measures(const GrayMapT<Scalar>& pred, const BinaryMask& gt, Scalar beta2) {
  require_same_shape(pred, gt, "f_measures");
  FMeasures<Scalar> out;
  std::array<std::int64_t, kThresholds> hist_fg{};
  std::array<std::int64_t, kThresholds> hist_all{};
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const int level = quantize_level(pred.data()[i]);
    ++hist_all[level];
    if (gt.data()[i]) ++hist_fg[level];
  }
  std::int64_t tp = 0;
  std::int64_t pp = 0;
  for (int t = kThresholds - 1; t >= 0; --t) {
    tp += hist_fg[t];
    pp += hist_all[t];
    out.counts.true_positive[t] = tp;
    out.counts.predicted_positive[t] = pp;
  }
  out.counts.gt_positive = gt.count();
  out.curve = pr_curve(out.counts);
  if (out.counts.gt_positive == 0) return out;

  Scalar best = 0;
  for (int t = 0; t < kThresholds; ++t) {
    best = std::max(best, f_beta<Scalar>(static_cast<Scalar>(out.curve.precision[t]),
                                         static_cast<Scalar>(out.curve.recall[t]), beta2));
  }
  out.maximum = best;

  const Raster<bool> bin = binarize(pred, adaptive_threshold(pred));
  const auto hit = (bin && gt).count();
  if (hit == 0) {
    out.adaptive = Scalar(0);
  } else {
    const Scalar precision = static_cast<Scalar>(hit) / static_cast<Scalar>(bin.count());
    const Scalar recall = static_cast<Scalar>(hit) / static_cast<Scalar>(out.counts.gt_positive);
    out.adaptive = f_beta(precision, recall, beta2);
  }
  return out;
}

NearestForeground nearest_foreground(const BinaryMask& gt) {
  const Eigen::Index h = gt.rows();
  const Eigen::Index w = gt.cols();
  NearestForeground out{Raster<double>::Constant(h, w, std::numeric_limits<double>::infinity()),
                        std::vector<std::vector<Eigen::Index>>(static_cast<std::size_t>(gt.size()))};
  if (!gt.any()) return out;

  // Nearest foreground column at or left/right of each pixel, per row.
  Raster<Eigen::Index> left(h, w);
  Raster<Eigen::Index> right(h, w);
  for (Eigen::Index r = 0; r < h; ++r) {
    Eigen::Index last = -1;
    for (Eigen::Index c = 0; c < w; ++c) {
      if (gt(r, c)) last = c;
      left(r, c) = last;
    }
    last = -1;
    for (Eigen::Index c = w - 1; c >= 0; --c) {
      if (gt(r, c)) last = c;
      right(r, c) = last;
    }
  }

  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) {
      auto& ties = out.nearest[static_cast<std::size_t>(r * w + c)];
      std::int64_t best_d2 = std::numeric_limits<std::int64_t>::max();
      auto consider = [&](Eigen::Index rr, Eigen::Index cc, std::int64_t dy2) {
        if (cc < 0) return;
        const std::int64_t dx = cc - c;
        const std::int64_t d2 = dy2 + dx * dx;
        const Eigen::Index idx = rr * w + cc;
        if (d2 < best_d2) {
          best_d2 = d2;
          ties.assign(1, idx);
        } else if (d2 == best_d2 && std::find(ties.begin(), ties.end(), idx) == ties.end()) {
          ties.push_back(idx);
        }
      };
      // Rows are visited by increasing vertical offset; none beyond sqrt(best) can tie.
      for (Eigen::Index off = 0; off < h; ++off) {
        const std::int64_t dy2 = static_cast<std::int64_t>(off) * off;
        if (dy2 > best_d2) break;
        for (int side = 0; side < (off == 0 ? 1 : 2); ++side) {
          const Eigen::Index rr = side == 0 ? r - off : r + off;
          if (rr < 0 || rr >= h) continue;
          consider(rr, left(rr, c), dy2);
          consider(rr, right(rr, c), dy2);
        }
      }
      std::sort(ties.begin(), ties.end());
      out.distance(r, c) = std::sqrt(static_cast<double>(best_d2));
    }
  }
  return out;
}

template <typename Scalar>
std::optional<Scalar> weighted_f_measure(const GrayMapT<Scalar>& pred, const BinaryMask& gt,
                                         const MetricOptions& options) {
  require_same_shape(pred, gt, "weighted_f_measure");
  if (!gt.any()) return std::nullopt;
  constexpr Scalar eps = std::numeric_limits<double>::epsilon();

  const GrayMapT<Scalar> g = gt.template cast<Scalar>();
  const GrayMapT<Scalar> error = (pred - g).abs();
  const auto nearest = nearest_foreground(gt);

  // Background pixels inherit the error of their nearest foreground pixel(s);
  // equidistant candidates are averaged.
  GrayMapT<Scalar> spread = error;
  for (Eigen::Index i = 0; i < gt.size(); ++i) {
    if (gt.data()[i]) continue;
    const auto& ties = nearest.nearest[static_cast<std::size_t>(i)];
    Scalar acc = 0;
    for (const auto j : ties) acc += error.data()[j];
    spread.data()[i] = acc / static_cast<Scalar>(ties.size());
  }
  const GrayMapT<Scalar> smoothed = filter_zero_padded(spread, dependency_kernel<Scalar>(options));

  const Scalar decay = static_cast<Scalar>(std::log(0.5) / 5.0);
  Scalar fg_err = 0;
  Scalar bg_err = 0;
  for (Eigen::Index i = 0; i < gt.size(); ++i) {
    if (gt.data()[i]) {
      fg_err += std::min(error.data()[i], smoothed.data()[i]);
    } else {
      const Scalar importance =
          Scalar(2) - std::exp(decay * static_cast<Scalar>(nearest.distance.data()[i]));
      bg_err += error.data()[i] * importance;
    }
  }
  const Scalar fg_count = static_cast<Scalar>(gt.count());
  const Scalar tp = fg_count - fg_err;
  const Scalar recall = Scalar(1) - fg_err / fg_count;
  const Scalar precision = tp / (eps + tp + bg_err);
  const Scalar beta2 = static_cast<Scalar>(options.wf_beta2);
  return (Scalar(1) + beta2) * recall * precision / (eps + recall + beta2 * precision);
}

MetricReport evaluate_image(const GrayMap& pred, const BinaryMask& gt, const MetricOptions& options,
                            ThresholdCounts* counts) {
  MetricReport r;
  r.s_measure = s_measure(pred, gt, options.s_alpha);
  r.mae = mae(pred, gt);
  r.e_measure = e_measure_adaptive(pred, gt);
  const auto f = f_measures(pred, gt, options.beta2);
  r.f_adaptive = f.adaptive;
  r.f_max = f.maximum;
  r.f_weighted = weighted_f_measure(pred, gt, options);
  if (counts != nullptr) *counts = f.counts;
  return r;
}

DatasetReport evaluate_dataset(const std::vector<EvalPair>& pairs, const MetricOptions& options) {
  if (pairs.empty()) throw PreconditionError("evaluate_dataset: no image pairs");
  DatasetReport report;
  report.per_image.resize(pairs.size());
  std::vector<ThresholdCounts> counts(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    try {
      report.per_image[i] = evaluate_image(pairs[i].pred, pairs[i].gt, options, &counts[i]);
    } catch (const DimensionMismatch& e) {
      throw DimensionMismatch("pair '" + pairs[i].name + "': " + e.what());
    }
    report.names.push_back(pairs[i].name);
  }

  double s = 0, m = 0, e = 0, fa = 0, fm = 0, fw = 0;
  int f_defined = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& r = report.per_image[i];
    s += r.s_measure;
    m += r.mae;
    e += r.e_measure;
    if (r.f_adaptive && r.f_max && r.f_weighted) {
      fa += *r.f_adaptive;
      fm += *r.f_max;
      fw += *r.f_weighted;
      ++f_defined;
    }
    report.counts += counts[i];
  }
  const double n = static_cast<double>(pairs.size());
  report.mean.s_measure = s / n;
  report.mean.mae = m / n;
  report.mean.e_measure = e / n;
  report.f_skipped = static_cast<int>(pairs.size()) - f_defined;
  if (f_defined > 0) {
    report.mean.f_adaptive = fa / f_defined;
    report.mean.f_max = fm / f_defined;
    report.mean.f_weighted = fw / f_defined;
  }
  report.curve = pr_curve(report.counts);
  return report;
}

#define WSCOD_INSTANTIATE_METRICS(S)                                                       \
  template int quantize_level(S);                                                          \
  template S adaptive_threshold(const GrayMapT<S>&);                                       \
  template S f_beta(S, S, S);                                                              \
  template S mae(const GrayMapT<S>&, const BinaryMask&);                                   \
  template S s_measure(const GrayMapT<S>&, const BinaryMask&, S);                          \
  template S e_measure_adaptive(const GrayMapT<S>&, const BinaryMask&);                    \
  template FMeasures<S> f_measures(const GrayMapT<S>&, const BinaryMask&, S);              \
  template std::optional<S> weighted_f_measure(const GrayMapT<S>&, const BinaryMask&,      \
                                               const MetricOptions&);

WSCOD_INSTANTIATE_METRICS(float)
WSCOD_INSTANTIATE_METRICS(double)

#undef WSCOD_INSTANTIATE_METRICS

}  // namespace wscod
