#include "wscod/sidecar_client.hpp"

#include <cmath>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "wscod/codec.hpp"

namespace wscod {
namespace {

using nlohmann::json;

std::string image_b64(const ImageBuffer& image) { return base64_encode(encode_image_png(image)); }

template <typename T>
T field(const json& j, const char* name) {
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw PayloadError(std::string("response field '") + name + "': " + e.what());
  }
}

class InFlightSlot {
 public:
  explicit InFlightSlot(std::counting_semaphore<>& sem) : sem_(sem) { sem_.acquire(); }
  ~InFlightSlot() { sem_.release(); }
  InFlightSlot(const InFlightSlot&) = delete;
  InFlightSlot& operator=(const InFlightSlot&) = delete;

 private:
  std::counting_semaphore<>& sem_;
};

}  // namespace

SidecarClient::SidecarClient(SidecarOptions options) : options_(std::move(options)) {
  if (options_.max_in_flight < 1) throw PreconditionError("max_in_flight must be >= 1");
  in_flight_ = std::make_unique<std::counting_semaphore<>>(options_.max_in_flight);
  auto reply = get("/v1/health");
  if (!reply.is_object() || reply.value("status", "") != "ok") {
    throw PayloadError("health check: sidecar did not report status ok");
  }
  health_ = std::make_shared<json>(std::move(reply));
}

namespace {

template <typename Send>
json perform(const SidecarOptions& options, const std::string& path, Send&& send) {
  httplib::Client client(options.endpoint);
  const auto secs = static_cast<time_t>(options.timeout_seconds);
  const auto usecs = static_cast<time_t>((options.timeout_seconds - secs) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  auto res = send(client);
  if (!res) {
    throw TransportError(path + ": " + httplib::to_string(res.error()) + " (" + options.endpoint +
                         ")");
  }
  json body;
  try {
    body = json::parse(res->body);
  } catch (const json::exception& e) {
    if (res->status < 200 || res->status >= 300) throw StatusError(res->status, res->body);
    throw PayloadError(path + ": malformed JSON: " + e.what());
  }
  if (res->status < 200 || res->status >= 300) {
    std::string message = path;
    if (body.is_object()) {
      message += ": " + body.value("error", std::string("error")) + ": " +
                 body.value("detail", std::string());
    }
    throw StatusError(res->status, message);
  }
  return body;
}

}  // namespace

json SidecarClient::get(const std::string& path) {
  InFlightSlot slot(*in_flight_);
  return perform(options_, path, [&](httplib::Client& c) { return c.Get(path); });
}

json SidecarClient::post(const std::string& path, const json& body) {
  InFlightSlot slot(*in_flight_);
  const std::string payload = body.dump();
  return perform(options_, path,
                 [&](httplib::Client& c) { return c.Post(path, payload, "application/json"); });
}

BinaryMask SidecarClient::decode_mask_reply(const json& reply, const ImageBuffer& image) {
  BinaryMask mask;
  try {
    mask = decode_mask_png(base64_decode(field<std::string>(reply, "mask_png_b64")));
  } catch (const DecodeError& e) {
    throw PayloadError(std::string("mask_png_b64: ") + e.what());
  }
  if (mask.cols() != image.width() || mask.rows() != image.height()) {
    throw DimensionMismatchError("mask is " + std::to_string(mask.cols()) + "x" +
                                 std::to_string(mask.rows()) + ", image is " +
                                 std::to_string(image.width()) + "x" +
                                 std::to_string(image.height()));
  }
  return mask;
}

BinaryMask SidecarClient::segment_point(const ImageBuffer& image, const Point& point) {
  const json body = {{"image_png_b64", image_b64(image)}, {"point", {{"x", point.x}, {"y", point.y}}}};
  return decode_mask_reply(post("/v1/segment_point", body), image);
}

BinaryMask SidecarClient::segment_box(const ImageBuffer& image, const BBox& box) {
  const json body = {{"image_png_b64", image_b64(image)},
                     {"box",
                      {{"x_min", box.x_min},
                       {"y_min", box.y_min},
                       {"x_max", box.x_max},
                       {"y_max", box.y_max}}}};
  return decode_mask_reply(post("/v1/segment_box", body), image);
}

std::vector<DetectedBox> SidecarClient::detect(const ImageBuffer& image, const std::string& text) {
  const json reply = post("/v1/detect", {{"image_png_b64", image_b64(image)}, {"text", text}});
  const auto boxes = field<json>(reply, "boxes");
  if (!boxes.is_array()) throw PayloadError("boxes: expected an array");
  std::vector<DetectedBox> out;
  for (const auto& jb : boxes) {
    DetectedBox d;
    d.box = BBox{field<int>(jb, "x_min"), field<int>(jb, "y_min"), field<int>(jb, "x_max"),
                 field<int>(jb, "y_max")};
    d.confidence = field<double>(jb, "confidence");
    if (!valid_box(d.box, image.width(), image.height())) {
      throw DimensionMismatchError("detected box outside " + std::to_string(image.width()) + "x" +
                                   std::to_string(image.height()) + " image");
    }
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
      throw PayloadError("confidence outside [0, 1]");
    }
    out.push_back(d);
  }
  return out;
}

double SidecarClient::score(const ImageBuffer& image, const std::string& text) {
  const json reply = post("/v1/score", {{"image_png_b64", image_b64(image)}, {"text", text}});
  const double similarity = field<double>(reply, "similarity");
  if (!std::isfinite(similarity)) throw PayloadError("similarity is not finite");
  return similarity;
}

Backends sidecar_backends(const SidecarOptions& options) {
  auto client = std::make_shared<SidecarClient>(options);
  return Backends{client, client, client, client};
}

}  // namespace wscod
