#pragma once

#include <span>
#include <string>

#include <Eigen/Core>

#include "wscod/backends.hpp"
#include "wscod/core.hpp"

namespace wscod {

/// Normalised 1-D Gaussian taps over [-ceil(3 sigma), ceil(3 sigma)].
Eigen::VectorXd gaussian_kernel(double sigma);

/// n x n operator applying the kernel along one axis with clamp-to-edge borders.
Eigen::MatrixXd blur_operator(Eigen::Index n, const Eigen::VectorXd& kernel);

/// Separable Gaussian blur of every channel, rounded back to 8 bits.
ImageBuffer gaussian_blur(const ImageBuffer& image, double sigma);

/// Original pixels inside the mask, pixels of `blurred` elsewhere.
ImageBuffer compose_prompt(const ImageBuffer& image, const ImageBuffer& blurred,
                           const BinaryMask& mask);

ImageBuffer reverse_blur_prompt(const ImageBuffer& image, const BinaryMask& mask, double sigma);

double cosine_similarity(std::span<const double> u, std::span<const double> v);

template <typename DerivedU, typename DerivedV>
typename DerivedU::Scalar cosine_similarity(const Eigen::MatrixBase<DerivedU>& u,
                                            const Eigen::MatrixBase<DerivedV>& v) {
  if (u.size() != v.size() || u.size() == 0) {
    throw PreconditionError("cosine_similarity: vectors must have equal non-zero length");
  }
  const auto nu = u.norm();
  const auto nv = v.norm();
  if (nu == 0 || nv == 0) throw PreconditionError("cosine_similarity: zero vector");
  return u.dot(v) / (nu * nv);
}

enum class CandidatePath { point, text };
std::string to_string(CandidatePath path);

struct SelectionRecord {
  CandidatePath chosen_path = CandidatePath::point;
  double score_point = 0.0;
  double score_text = 0.0;
  std::string prompt_used;
  bool both_empty = false;
};

struct Selection {
  BinaryMask mask;
  SelectionRecord record;
};

/// Scores both reverse-blur prompted images against the templated prompt and keeps
/// the higher-scoring candidate. Ties go to the point mask.
Selection choose_mask(const ImageBuffer& image, const CandidatePair& candidates,
                      const TextTag& text, ImageTextScorer& scorer, const PipelineParams& params);

}  // namespace wscod
