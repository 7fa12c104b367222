#include "wscod/oracle.hpp"

#include <algorithm>
#include <mutex>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wscod/qcd.hpp"

namespace wscod {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Inclusive integer draw; avoids std distributions, whose output is implementation-defined.
int draw(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

const std::vector<std::string>& category_tags() {
  static const std::vector<std::string> tags = {"fish", "frog",  "owl",   "crab",
                                                "moth", "snake", "gecko", "spider"};
  return tags;
}

bool boxes_overlap(const BBox& a, const BBox& b, int margin) {
  return !(a.x_max + margin < b.x_min || b.x_max + margin < a.x_min ||
           a.y_max + margin < b.y_min || b.y_max + margin < a.y_min);
}

}  // namespace

bool SceneObject::contains(int x, int y) const {
  const long dx = x - cx;
  const long dy = y - cy;
  if (shape == ShapeKind::disk) return dx * dx + dy * dy <= static_cast<long>(half_width) * half_width;
  return std::abs(dx) <= half_width && std::abs(dy) <= half_height;
}

void SyntheticScene::validate() const {
  if (width < 1 || height < 1) throw PreconditionError("scene: canvas must be non-empty");
  for (const auto& o : objects) {
    if (!point_in_image({o.cx, o.cy}, width, height)) {
      throw PreconditionError("scene: object centre outside canvas");
    }
    if (o.half_width < 0 || o.half_height < 0) throw PreconditionError("scene: negative size");
  }
}

ImageBuffer SyntheticScene::render() const {
  validate();
  ImageBuffer image(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      auto color = background;
      for (const auto& o : objects) {
        if (o.contains(x, y)) color = o.color;
      }
      for (int c = 0; c < 3; ++c) {
        int value = color[c];
        if (noise_amplitude > 0) {
          const auto key = ((seed * 0x100000001b3ULL) ^ (static_cast<std::uint64_t>(y) * width + x)) * 4 + c;
          value += static_cast<int>(splitmix64(key) % (2 * noise_amplitude + 1)) - noise_amplitude;
        }
        image.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(value, 0, 255));
      }
    }
  }
  return image;
}

BinaryMask SyntheticScene::object_mask(std::size_t index) const {
  const auto& o = objects.at(index);
  BinaryMask mask = empty_mask(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) mask(y, x) = o.contains(x, y);
  }
  return mask;
}

BBox SyntheticScene::object_box(std::size_t index) const {
  const auto& o = objects.at(index);
  const int hh = o.shape == ShapeKind::disk ? o.half_width : o.half_height;
  return BBox{std::max(o.cx - o.half_width, 0), std::max(o.cy - hh, 0),
              std::min(o.cx + o.half_width, width - 1), std::min(o.cy + hh, height - 1)};
}

BinaryMask SyntheticScene::camouflaged_mask() const {
  BinaryMask mask = empty_mask(width, height);
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].camouflaged) mask = mask || object_mask(i);
  }
  return mask;
}

void to_json(nlohmann::json& j, const SyntheticScene& scene) {
  auto objects = nlohmann::json::array();
  for (const auto& o : scene.objects) {
    objects.push_back({{"shape", o.shape == ShapeKind::disk ? "disk" : "rectangle"},
                       {"cx", o.cx},
                       {"cy", o.cy},
                       {"half_width", o.half_width},
                       {"half_height", o.half_height},
                       {"tag", o.tag},
                       {"camouflaged", o.camouflaged},
                       {"color", o.color}});
  }
  j = {{"width", scene.width},
       {"height", scene.height},
       {"background", scene.background},
       {"noise_amplitude", scene.noise_amplitude},
       {"seed", scene.seed},
       {"objects", objects}};
}

void from_json(const nlohmann::json& j, SyntheticScene& scene) {
  scene.width = j.at("width").get<int>();
  scene.height = j.at("height").get<int>();
  scene.background = j.at("background").get<std::array<std::uint8_t, 3>>();
  scene.noise_amplitude = j.value("noise_amplitude", 0);
  scene.seed = j.value("seed", std::uint64_t{0});
  scene.objects.clear();
  for (const auto& jo : j.at("objects")) {
    SceneObject o;
    const auto shape = jo.at("shape").get<std::string>();
    if (shape != "disk" && shape != "rectangle") {
      throw std::invalid_argument("scene: unknown shape '" + shape + "'");
    }
    o.shape = shape == "disk" ? ShapeKind::disk : ShapeKind::rectangle;
    o.cx = jo.at("cx").get<int>();
    o.cy = jo.at("cy").get<int>();
    o.half_width = jo.at("half_width").get<int>();
    o.half_height = jo.value("half_height", o.half_width);
    o.tag = jo.at("tag").get<std::string>();
    o.camouflaged = jo.at("camouflaged").get<bool>();
    o.color = jo.at("color").get<std::array<std::uint8_t, 3>>();
    scene.objects.push_back(std::move(o));
  }
  scene.validate();
}

GeneratedSample generate_scene(std::uint64_t seed, const SceneOptions& options) {
  std::mt19937_64 rng(splitmix64(seed));
  GeneratedSample out;
  auto& scene = out.scene;
  scene.width = options.width;
  scene.height = options.height;
  scene.seed = seed;
  scene.noise_amplitude = 6;
  for (auto& c : scene.background) c = static_cast<std::uint8_t>(draw(rng, 60, 190));

  const auto& tags = category_tags();
  out.tag = tags[static_cast<std::size_t>(draw(rng, 0, static_cast<int>(tags.size()) - 1))];

  const int min_dim = std::min(options.width, options.height);
  const double canvas = static_cast<double>(options.width) * options.height;
  SceneObject target;
  target.camouflaged = true;
  target.tag = out.tag;
  target.shape = draw(rng, 0, 1) == 0 ? ShapeKind::disk : ShapeKind::rectangle;
  for (;;) {
    target.half_width = draw(rng, std::max(2, min_dim / 12), std::max(3, min_dim * 2 / 5));
    target.half_height = target.shape == ShapeKind::disk
                             ? target.half_width
                             : draw(rng, std::max(2, min_dim / 12), std::max(3, min_dim * 2 / 5));
    const double area = (2.0 * target.half_width + 1) * (2.0 * target.half_height + 1);
    if (area <= options.max_object_fraction * canvas) break;
  }
  target.cx = draw(rng, target.half_width, options.width - 1 - target.half_width);
  target.cy = draw(rng, target.half_height, options.height - 1 - target.half_height);
  for (int c = 0; c < 3; ++c) {
    target.color[c] = static_cast<std::uint8_t>(scene.background[c] + draw(rng, -14, 14));
  }
  scene.objects.push_back(target);

  const int distractors = draw(rng, 0, options.max_distractors);
  for (int d = 0, attempts = 0; d < distractors && attempts < 200; ++attempts) {
    SceneObject o;
    o.shape = draw(rng, 0, 1) == 0 ? ShapeKind::disk : ShapeKind::rectangle;
    o.half_width = draw(rng, 2, std::max(3, min_dim / 8));
    o.half_height = o.shape == ShapeKind::disk ? o.half_width : draw(rng, 2, std::max(3, min_dim / 8));
    if (2 * o.half_width + 1 > options.width || 2 * o.half_height + 1 > options.height) continue;
    o.cx = draw(rng, o.half_width, options.width - 1 - o.half_width);
    o.cy = draw(rng, o.half_height, options.height - 1 - o.half_height);
    // Same-tag distractors exercise the non-camouflaged detection case.
    o.tag = draw(rng, 0, 1) == 0 ? out.tag : tags[static_cast<std::size_t>(draw(rng, 0, 7))];
    o.camouflaged = false;
    for (int c = 0; c < 3; ++c) o.color[c] = static_cast<std::uint8_t>(255 - scene.background[c]);
    scene.objects.push_back(o);
    const auto box = scene.object_box(scene.objects.size() - 1);
    bool clash = false;
    for (std::size_t i = 0; i + 1 < scene.objects.size(); ++i) {
      clash = clash || boxes_overlap(box, scene.object_box(i), 2);
    }
    if (clash) {
      scene.objects.pop_back();
    } else {
      ++d;
    }
  }

  const BinaryMask target_mask = scene.object_mask(0);
  std::vector<Point> inside;
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      if (target_mask(y, x)) inside.push_back({x, y});
    }
  }
  out.points.push_back(inside[static_cast<std::size_t>(draw(rng, 0, static_cast<int>(inside.size()) - 1))]);
  return out;
}

FaultPlan parse_fault_plan(const std::string& spec) {
  FaultPlan plan;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || item == "none") continue;
    if (item == "full-image-box") {
      plan.full_image_box = true;
    } else if (item == "drop-detections") {
      plan.drop_detections = true;
    } else if (item == "background-false-positive") {
      plan.background_false_positive = true;
    } else {
      throw std::invalid_argument("unknown fault '" + item + "'");
    }
  }
  return plan;
}

namespace {

class OracleModel final : public PointSegmenter,
                          public BoxSegmenter,
                          public TextBoxDetector,
                          public ImageTextScorer {
 public:
  OracleModel(SyntheticScene scene, FaultPlan faults, double sigma)
      : scene_(std::move(scene)), faults_(faults), sigma_(sigma) {
    scene_.validate();
    for (std::size_t i = 0; i < scene_.objects.size(); ++i) masks_.push_back(scene_.object_mask(i));
    truth_ = scene_.camouflaged_mask();
  }

  BinaryMask segment_point(const ImageBuffer& image, const Point& p) override {
    check_image(image);
    BinaryMask out = empty_mask(scene_.width, scene_.height);
    for (std::size_t i = 0; i < scene_.objects.size(); ++i) {
      if (scene_.objects[i].contains(p.x, p.y)) out = masks_[i];
    }
    return out;
  }

  BinaryMask segment_box(const ImageBuffer& image, const BBox& box) override {
    check_image(image);
    BinaryMask out = empty_mask(scene_.width, scene_.height);
    for (std::size_t i = 0; i < scene_.objects.size(); ++i) {
      if (point_in_box({scene_.objects[i].cx, scene_.objects[i].cy}, box)) out = out || masks_[i];
    }
    return out;
  }

  std::vector<DetectedBox> detect(const ImageBuffer& image, const std::string& text) override {
    check_image(image);
    if (faults_.drop_detections) return {};
    if (faults_.full_image_box) return {{BBox{0, 0, scene_.width - 1, scene_.height - 1}, 0.9}};
    std::vector<DetectedBox> out;
    for (std::size_t i = 0; i < scene_.objects.size(); ++i) {
      if (matches(text, scene_.objects[i].tag)) out.push_back({scene_.object_box(i), 0.9});
    }
    if (faults_.background_false_positive) out.push_back({false_positive_box(), 0.5});
    return out;
  }

  double score(const ImageBuffer& image, const std::string& text) override {
    check_image(image);
    const bool tag_match = std::any_of(scene_.objects.begin(), scene_.objects.end(),
                                       [&](const SceneObject& o) {
                                         return o.camouflaged && matches(text, o.tag);
                                       });
    if (!tag_match) return 0.0;
    std::call_once(blur_once_, [this] {
      original_ = scene_.render();
      blurred_ = gaussian_blur(original_, sigma_);
    });
    long inter = 0;
    long uni = 0;
    for (int y = 0; y < scene_.height; ++y) {
      for (int x = 0; x < scene_.width; ++x) {
        bool same_as_original = true;
        bool distinguishable = false;
        for (int c = 0; c < 3; ++c) {
          same_as_original = same_as_original && image.at(x, y, c) == original_.at(x, y, c);
          distinguishable = distinguishable || original_.at(x, y, c) != blurred_.at(x, y, c);
        }
        if (!distinguishable) continue;
        const bool sharp = same_as_original;
        inter += sharp && truth_(y, x);
        uni += sharp || truth_(y, x);
      }
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
  }

 private:
  static bool matches(const std::string& text, const std::string& tag) {
    return !tag.empty() && text.find(tag) != std::string::npos;
  }

  void check_image(const ImageBuffer& image) const {
    if (image.width() != scene_.width || image.height() != scene_.height) {
      throw DimensionMismatch("oracle: image does not match scene canvas");
    }
  }

  // Tight box of the first non-camouflaged object, or the largest corner
  // rectangle that avoids every camouflaged object.
  BBox false_positive_box() const {
    for (std::size_t i = 0; i < scene_.objects.size(); ++i) {
      if (!scene_.objects[i].camouflaged) return scene_.object_box(i);
    }
    BBox best{0, 0, 0, 0};
    long best_area = -1;
    const int w = scene_.width;
    const int h = scene_.height;
    for (const auto& corner : {BBox{0, 0, w / 4, h / 4}, BBox{w - 1 - w / 4, 0, w - 1, h / 4},
                               BBox{0, h - 1 - h / 4, w / 4, h - 1},
                               BBox{w - 1 - w / 4, h - 1 - h / 4, w - 1, h - 1}}) {
      bool clear = true;
      for (int y = corner.y_min; y <= corner.y_max && clear; ++y) {
        for (int x = corner.x_min; x <= corner.x_max && clear; ++x) clear = !truth_(y, x);
      }
      const long area = static_cast<long>(corner.width()) * corner.height();
      if (clear && area > best_area) {
        best = corner;
        best_area = area;
      }
    }
    return best;
  }

  SyntheticScene scene_;
  FaultPlan faults_;
  double sigma_;
  std::vector<BinaryMask> masks_;
  BinaryMask truth_;
  std::once_flag blur_once_;
  ImageBuffer original_;
  ImageBuffer blurred_;
};

}  // namespace

Backends oracle_backends(const SyntheticScene& scene, const FaultPlan& faults, double sigma) {
  auto model = std::make_shared<OracleModel>(scene, faults, sigma);
  return Backends{model, model, model, model};
}

}  // namespace wscod
