#include "wscod/qcd.hpp"

#include <algorithm>
#include <cmath>

namespace wscod {

Eigen::VectorXd gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw PreconditionError("gaussian_kernel: sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  Eigen::VectorXd taps(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k) {
    taps(k + radius) = std::exp(-static_cast<double>(k) * k / (2.0 * sigma * sigma));
  }
  return taps / taps.sum();
}

Eigen::MatrixXd blur_operator(Eigen::Index n, const Eigen::VectorXd& kernel) {
  const Eigen::Index radius = kernel.size() / 2;
  Eigen::MatrixXd op = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = -radius; k <= radius; ++k) {
      const Eigen::Index src = std::clamp<Eigen::Index>(i + k, 0, n - 1);
      op(i, src) += kernel(k + radius);
    }
  }
  return op;
}

ImageBuffer gaussian_blur(const ImageBuffer& image, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  const Eigen::MatrixXd rows_op = blur_operator(image.height(), kernel);
  const Eigen::MatrixXd cols_op = blur_operator(image.width(), kernel);
  ImageBuffer out(image.width(), image.height());
  for (int c = 0; c < 3; ++c) {
    const Eigen::MatrixXd plane = image.channel(c).matrix();
    const Eigen::MatrixXd blurred = rows_op * plane * cols_op.transpose();
    out.set_channel(c, blurred.array());
  }
  return out;
}

ImageBuffer compose_prompt(const ImageBuffer& image, const ImageBuffer& blurred,
                           const BinaryMask& mask) {
  if (image.width() != blurred.width() || image.height() != blurred.height()) {
    throw DimensionMismatch("compose_prompt: blurred image size differs");
  }
  if (mask.cols() != image.width() || mask.rows() != image.height()) {
    throw DimensionMismatch("reverse blur: mask " + std::to_string(mask.cols()) + "x" +
                            std::to_string(mask.rows()) + " vs image " +
                            std::to_string(image.width()) + "x" + std::to_string(image.height()));
  }
  ImageBuffer out = image;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (mask(y, x)) continue;
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = blurred.at(x, y, c);
    }
  }
  return out;
}

ImageBuffer reverse_blur_prompt(const ImageBuffer& image, const BinaryMask& mask, double sigma) {
  if (mask.cols() != image.width() || mask.rows() != image.height()) {
    throw DimensionMismatch("reverse blur: mask does not match image");
  }
  if (mask.all()) return image;
  return compose_prompt(image, gaussian_blur(image, sigma), mask);
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  using Vec = Eigen::Map<const Eigen::VectorXd>;
  if (u.size() != v.size()) throw PreconditionError("cosine_similarity: length mismatch");
  return cosine_similarity(Vec(u.data(), static_cast<Eigen::Index>(u.size())),
                           Vec(v.data(), static_cast<Eigen::Index>(v.size())));
}

std::string to_string(CandidatePath path) {
  return path == CandidatePath::point ? "point" : "text";
}

Selection choose_mask(const ImageBuffer& image, const CandidatePair& candidates,
                      const TextTag& text, ImageTextScorer& scorer, const PipelineParams& params) {
  params.validate();
  const std::string prompt = params.format_prompt(text);
  const ImageBuffer blurred = gaussian_blur(image, params.sigma);

  auto score = [&](const BinaryMask& mask, CandidatePath path) {
    const ImageBuffer prompted = compose_prompt(image, blurred, mask);
    try {
      return scorer.score(prompted, prompt);
    } catch (const std::exception& e) {
      throw BackendError("scoring " + to_string(path) + " candidate: " + e.what());
    }
  };

  Selection out;
  out.record.prompt_used = prompt;
  out.record.score_point = score(candidates.point_mask, CandidatePath::point);
  out.record.score_text = score(candidates.text_mask, CandidatePath::text);
  out.record.both_empty = !candidates.point_mask.any() && !candidates.text_mask.any();
  if (out.record.score_text > out.record.score_point && !out.record.both_empty) {
    out.record.chosen_path = CandidatePath::text;
    out.mask = candidates.text_mask;
  } else {
    out.record.chosen_path = CandidatePath::point;
    out.mask = candidates.point_mask;
  }
  return out;
}

}  // namespace wscod
