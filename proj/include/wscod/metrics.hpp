#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wscod/core.hpp"

namespace wscod {

inline constexpr int kThresholds = 256;

/// Constants of the six evaluation metrics.
struct MetricOptions {
  double beta2 = 0.3;           // F_phi and F_max
  double s_alpha = 0.5;         // object/region split of S-measure
  double wf_beta2 = 1.0;        // weighted F
  double wf_sigma = 5.0;        // Gaussian dependency kernel
  int wf_window = 7;
  bool operator==(const MetricOptions&) const = default;
};

/// Positive counts per 8-bit threshold t (prediction level >= t).
struct ThresholdCounts {
  std::array<std::int64_t, kThresholds> true_positive{};
  std::array<std::int64_t, kThresholds> predicted_positive{};
  std::int64_t gt_positive = 0;

  ThresholdCounts& operator+=(const ThresholdCounts& other);
};

struct PRCurve {
  std::array<double, kThresholds> precision{};
  std::array<double, kThresholds> recall{};
};

PRCurve pr_curve(const ThresholdCounts& counts);

template <typename Scalar>
struct FMeasures {
  // Both empty when the ground truth has no foreground.
  std::optional<Scalar> adaptive;
  std::optional<Scalar> maximum;
  ThresholdCounts counts;
  PRCurve curve;
};

/// Level of a prediction value on the 0..255 grid.
template <typename Scalar>
int quantize_level(Scalar value);

template <typename Scalar>
Scalar adaptive_threshold(const GrayMapT<Scalar>& pred);

template <typename Scalar>
Scalar f_beta(Scalar precision, Scalar recall, Scalar beta2);

template <typename Scalar>
Scalar mae(const GrayMapT<Scalar>& pred, const BinaryMask& gt);

template <typename Scalar>
Scalar s_measure(const GrayMapT<Scalar>& pred, const BinaryMask& gt, Scalar alpha = Scalar(0.5));

template <typename Scalar>
Scalar e_measure_adaptive(const GrayMapT<Scalar>& pred, const BinaryMask& gt);

template <typename Scalar>
FMeasures<Scalar> f_measures(const GrayMapT<Scalar>& pred, const BinaryMask& gt,
                             Scalar beta2 = Scalar(0.3));

/// Distance-weighted F-measure; empty when the ground truth has no foreground.
template <typename Scalar>
std::optional<Scalar> weighted_f_measure(const GrayMapT<Scalar>& pred, const BinaryMask& gt,
                                         const MetricOptions& options = {});

/// For every pixel, the Euclidean distance to the nearest foreground pixel of `gt`
/// and the sorted row-major indices of every foreground pixel at that distance.
/// Foreground pixels map to themselves.
struct NearestForeground {
  Raster<double> distance;
  std::vector<std::vector<Eigen::Index>> nearest;
};
NearestForeground nearest_foreground(const BinaryMask& gt);

/// Table column order: S_alpha, M, E_phi, F_phi, F_max, F_w.
struct MetricReport {
  double s_measure = 0.0;
  double mae = 0.0;
  double e_measure = 0.0;
  std::optional<double> f_adaptive;
  std::optional<double> f_max;
  std::optional<double> f_weighted;
};

MetricReport evaluate_image(const GrayMap& pred, const BinaryMask& gt,
                            const MetricOptions& options = {}, ThresholdCounts* counts = nullptr);

struct EvalPair {
  std::string name;
  GrayMap pred;
  BinaryMask gt;
};

struct DatasetReport {
  std::vector<std::string> names;
  std::vector<MetricReport> per_image;
  MetricReport mean;
  int f_skipped = 0;  // images whose F-based metrics are undefined
  ThresholdCounts counts;
  PRCurve curve;
};

DatasetReport evaluate_dataset(const std::vector<EvalPair>& pairs, const MetricOptions& options = {});

extern template float mae(const GrayMapT<float>&, const BinaryMask&);
extern template double mae(const GrayMapT<double>&, const BinaryMask&);
extern template float s_measure(const GrayMapT<float>&, const BinaryMask&, float);
extern template double s_measure(const GrayMapT<double>&, const BinaryMask&, double);
extern template float e_measure_adaptive(const GrayMapT<float>&, const BinaryMask&);
extern template double e_measure_adaptive(const GrayMapT<double>&, const BinaryMask&);
extern template FMeasures<float> f_measures(const GrayMapT<float>&, const BinaryMask&, float);
extern template FMeasures<double> f_measures(const GrayMapT<double>&, const BinaryMask&, double);
extern template std::optional<float> weighted_f_measure(const GrayMapT<float>&, const BinaryMask&,
                                                        const MetricOptions&);
extern template std::optional<double> weighted_f_measure(const GrayMapT<double>&,
                                                         const BinaryMask&, const MetricOptions&);

}  // namespace wscod
