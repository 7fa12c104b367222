#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wscod/backends.hpp"
#include "wscod/core.hpp"

namespace wscod {

enum class ShapeKind { disk, rectangle };

struct SceneObject {
  ShapeKind shape = ShapeKind::disk;
  int cx = 0;
  int cy = 0;
  int half_width = 1;   // radius for disks
  int half_height = 1;  // ignored for disks
  std::string tag;
  bool camouflaged = false;
  std::array<std::uint8_t, 3> color{};

  bool contains(int x, int y) const;
  bool operator==(const SceneObject&) const = default;
};

/// Deterministic test world: flat-coloured shapes over a flat background with
/// seeded per-pixel noise.
struct SyntheticScene {
  int width = 0;
  int height = 0;
  std::array<std::uint8_t, 3> background{};
  int noise_amplitude = 0;
  std::uint64_t seed = 0;
  std::vector<SceneObject> objects;

  void validate() const;
  ImageBuffer render() const;
  BinaryMask object_mask(std::size_t index) const;
  /// Tight pixel box of an object, clipped to the canvas.
  BBox object_box(std::size_t index) const;
  BinaryMask camouflaged_mask() const;
  bool operator==(const SyntheticScene&) const = default;
};

void to_json(nlohmann::json& j, const SyntheticScene& scene);
void from_json(const nlohmann::json& j, SyntheticScene& scene);

struct SceneOptions {
  int width = 128;
  int height = 128;
  int max_distractors = 2;
  double max_object_fraction = 0.5;
};

struct GeneratedSample {
  SyntheticScene scene;
  PointSet points;
  std::string tag;
};

/// One camouflaged object plus up to max_distractors non-camouflaged ones, with
/// non-overlapping tight boxes and one annotated point inside the camouflaged object.
GeneratedSample generate_scene(std::uint64_t seed, const SceneOptions& options = {});

struct FaultPlan {
  bool full_image_box = false;       // detector returns only the whole canvas
  bool drop_detections = false;      // detector returns nothing
  bool background_false_positive = false;  // detector adds a box around background

  bool any() const { return full_image_box || drop_detections || background_false_positive; }
  bool operator==(const FaultPlan&) const = default;
};

FaultPlan parse_fault_plan(const std::string& spec);

/// All four model roles answered exactly from the scene description. The scorer
/// needs the reverse-blur sigma to tell sharp pixels from blurred ones.
Backends oracle_backends(const SyntheticScene& scene, const FaultPlan& faults = {},
                         double sigma = 50.0);

}  // namespace wscod
