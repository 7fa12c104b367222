#pragma once

#include <memory>
#include <semaphore>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "wscod/backends.hpp"

namespace wscod {

/// No response from the sidecar (connection refused, timeout, ...).
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Non-2xx status; carries the server's {error, detail} body when present.
class StatusError : public BackendError {
 public:
  StatusError(int status, const std::string& message)
      : BackendError("HTTP " + std::to_string(status) + ": " + message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

/// Response body is not the documented JSON shape or carries an undecodable PNG.
class PayloadError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Response is well-formed but contradicts the request geometry.
class DimensionMismatchError : public BackendError {
 public:
  using BackendError::BackendError;
};

struct SidecarOptions {
  std::string endpoint = "http://127.0.0.1:8765";
  double timeout_seconds = 60.0;
  int max_in_flight = 4;
};

/// HTTP client for the model sidecar; implements all four model roles.
/// Constructing it performs the health check.
class SidecarClient final : public PointSegmenter,
                            public BoxSegmenter,
                            public TextBoxDetector,
                            public ImageTextScorer {
 public:
  explicit SidecarClient(SidecarOptions options);

  BinaryMask segment_point(const ImageBuffer& image, const Point& point) override;
  BinaryMask segment_box(const ImageBuffer& image, const BBox& box) override;
  std::vector<DetectedBox> detect(const ImageBuffer& image, const std::string& text) override;
  double score(const ImageBuffer& image, const std::string& text) override;

  const nlohmann::json& health() const { return *health_; }

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body);
  nlohmann::json get(const std::string& path);
  BinaryMask decode_mask_reply(const nlohmann::json& reply, const ImageBuffer& image);

  SidecarOptions options_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
  std::shared_ptr<nlohmann::json> health_;
};

Backends sidecar_backends(const SidecarOptions& options);

}  // namespace wscod
