#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rpn2t/geometry.hpp"
#include "rpn2t/image.hpp"

namespace rpn2t {

struct Motion {
  enum class Kind { Static, Linear, RandomWalk };
  Kind kind = Kind::Static;
  double vx = 0.0;     // px/frame, Linear
  double vy = 0.0;
  double sigma = 0.0;  // px/frame, RandomWalk

  static Motion still() { return {}; }
  static Motion linear(double vx, double vy) { return {Kind::Linear, vx, vy, 0.0}; }
  static Motion random_walk(double sigma) { return {Kind::RandomWalk, 0.0, 0.0, sigma}; }
};

struct Occlusion {
  int start = 0;          // first occluded frame (0-based)
  int duration = 0;       // frames
  double coverage = 0.5;  // fraction of the target width hidden, from the left
};

struct SynthConfig {
  std::string name = "synth";
  int frame_width = 160;
  int frame_height = 160;
  int length = 40;
  int target_width = 40;
  int target_height = 40;
  Motion motion;
  double appearance_drift = 0.0;  // per-frame texture innovation in [0, 1]
  std::optional<Occlusion> occlusion;
  int distractors = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthSequence {
  std::string name;
  std::vector<Image> frames;
  std::vector<Rect> groundtruth;
  std::vector<int> visible_pixels;  // unoccluded target pixels per frame
};

/// Renders a textured target over a textured static background. Target
/// positions are whole pixels, so groundtruth is exact. The target texture
/// follows t_k = sqrt(1 - d^2) t_{k-1} + d n_k for drift d and fresh noise n_k.
SynthSequence generate(const SynthConfig& cfg);

// Named suites: "easy", "drift-prone", "occlusion". Sequence seeds derive
// from `seed` so suites are reproducible.
std::vector<SynthConfig> preset_suite(const std::string& name, std::uint64_t seed = 0);
std::vector<std::string> preset_names();

// Square patches centred on random boxes of `frames`, for distillation data.
std::vector<Image> random_patches(const std::vector<Image>& frames, int count, int size,
                                  std::uint64_t seed);

}  // namespace rpn2t
