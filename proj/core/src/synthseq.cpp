#include "rpn2t/synthseq.hpp"

#include <algorithm>
#include <cmath>

#include "rpn2t/error.hpp"
#include "rpn2t/tensor.hpp"

namespace rpn2t {

namespace {

// Zero-mean value noise: random lattice values bilinearly interpolated, summed
// over octaves, then normalised to unit standard deviation.
std::vector<float> value_noise(int w, int h, double cell, int octaves, Rng& rng) {
  std::vector<float> out(static_cast<size_t>(w) * h, 0.0f);
  double amp = 1.0;
  for (int o = 0; o < octaves; ++o, cell *= 0.5, amp *= 0.6) {
    const double c = std::max(cell, 1.0);
    const int gw = static_cast<int>(std::ceil(w / c)) + 2;
    const int gh = static_cast<int>(std::ceil(h / c)) + 2;
    std::vector<double> lattice(static_cast<size_t>(gw) * gh);
    for (auto& v : lattice) v = rng.uniform(-1.0, 1.0);
    for (int y = 0; y < h; ++y) {
      const double fy = y / c;
      const int y0 = static_cast<int>(fy);
      const double ty = fy - y0;
      for (int x = 0; x < w; ++x) {
        const double fx = x / c;
        const int x0 = static_cast<int>(fx);
        const double tx = fx - x0;
        auto L = [&](int xx, int yy) { return lattice[static_cast<size_t>(yy) * gw + xx]; };
        const double top = L(x0, y0) + tx * (L(x0 + 1, y0) - L(x0, y0));
        const double bot = L(x0, y0 + 1) + tx * (L(x0 + 1, y0 + 1) - L(x0, y0 + 1));
        out[static_cast<size_t>(y) * w + x] += static_cast<float>(amp * (top + ty * (bot - top)));
      }
    }
  }
  double mean = 0.0, sq = 0.0;
  for (float v : out) mean += v;
  mean /= static_cast<double>(out.size());
  for (float v : out) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(out.size()));
  for (auto& v : out) v = static_cast<float>((v - mean) / (sd > 0 ? sd : 1.0));
  return out;
}

// Three-channel noise texture (one independent field per channel).
struct Texture {
  int w = 0, h = 0;
  std::vector<float> ch[3];
};

Texture make_texture(int w, int h, double cell, int octaves, Rng& rng) {
  Texture t{w, h, {}};
  for (auto& c : t.ch) c = value_noise(w, h, cell, octaves, rng);
  return t;
}

struct Palette {
  float base[3];
  float contrast;
};

void blit(Image& frame, const Texture& tex, const Palette& pal, int x0, int y0, int skip_cols) {
  for (int y = 0; y < tex.h; ++y) {
    const int fy = y0 + y;
    if (fy < 0 || fy >= frame.height) continue;
    for (int x = skip_cols; x < tex.w; ++x) {
      const int fx = x0 + x;
      if (fx < 0 || fx >= frame.width) continue;
      for (int c = 0; c < 3; ++c) {
        const float v = pal.base[c] + pal.contrast * tex.ch[c][static_cast<size_t>(y) * tex.w + x];
        frame.at(fx, fy, c) = std::clamp(v, 0.0f, 255.0f);
      }
    }
  }
}

double clamp_pos(double v, int extent, int frame) {
  return std::clamp(v, 1.0, static_cast<double>(frame - extent - 1));
}

}  // namespace

void SynthConfig::validate() const {
  if (frame_width <= 0 || frame_height <= 0 || length < 1 || target_width <= 0 ||
      target_height <= 0) {
    throw UsageError("synthetic sequence sizes must be positive");
  }
  if (target_width + 2 > frame_width || target_height + 2 > frame_height) {
    throw DataError("target does not fit inside the frame");
  }
  if (!(appearance_drift >= 0.0 && appearance_drift <= 1.0)) {
    throw UsageError("appearance drift must lie in [0, 1]");
  }
  if (occlusion && (occlusion->duration < 0 || !(occlusion->coverage >= 0.0) ||
                    occlusion->coverage > 1.0)) {
    throw UsageError("invalid occlusion");
  }
  if (distractors < 0) throw UsageError("distractor count must be non-negative");
}

SynthSequence generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Rng motion_rng = rng.split();
  Rng drift_rng = rng.split();

  const int W = cfg.frame_width, H = cfg.frame_height;
  const int tw = cfg.target_width, th = cfg.target_height;

  const Texture background = make_texture(W, H, 24.0, 3, rng);
  const Palette bg_pal{{110.0f, 118.0f, 112.0f}, 28.0f};
  Texture target = make_texture(tw, th, 7.0, 2, rng);
  const Palette tg_pal{{static_cast<float>(rng.uniform(120, 200)), static_cast<float>(rng.uniform(60, 140)),
                        static_cast<float>(rng.uniform(60, 140))},
                       55.0f};

  struct Decoy {
    Texture tex;
    double x, y;
  };
  std::vector<Decoy> decoys;
  for (int i = 0; i < cfg.distractors; ++i) {
    Texture t = make_texture(tw, th, 7.0, 2, rng);
    // Similar texture: mostly the target's own pattern.
    for (int c = 0; c < 3; ++c)
      for (size_t k = 0; k < t.ch[c].size(); ++k)
        t.ch[c][k] = 0.8f * target.ch[c][k] + 0.6f * t.ch[c][k];
    decoys.push_back({std::move(t), rng.uniform(1, W - tw - 1), rng.uniform(1, H - th - 1)});
  }

  double x = std::round(0.5 * (W - tw));
  double y = std::round(0.5 * (H - th));
  if (cfg.motion.kind == Motion::Kind::Linear) {
    // Start so the whole trajectory stays inside the frame when possible.
    const double dx = cfg.motion.vx * (cfg.length - 1);
    const double dy = cfg.motion.vy * (cfg.length - 1);
    x = std::round(clamp_pos(0.5 * (W - tw) - 0.5 * dx, tw, W));
    y = std::round(clamp_pos(0.5 * (H - th) - 0.5 * dy, th, H));
  }
  const double x_start = x, y_start = y;

  SynthSequence seq;
  seq.name = cfg.name;
  const double keep = std::sqrt(1.0 - cfg.appearance_drift * cfg.appearance_drift);
  for (int f = 0; f < cfg.length; ++f) {
    if (f > 0) {
      switch (cfg.motion.kind) {
        case Motion::Kind::Static: break;
        case Motion::Kind::Linear:
          x = std::round(clamp_pos(x_start + cfg.motion.vx * f, tw, W));
          y = std::round(clamp_pos(y_start + cfg.motion.vy * f, th, H));
          break;
        case Motion::Kind::RandomWalk:
          x = std::round(clamp_pos(x + motion_rng.normal(0.0, cfg.motion.sigma), tw, W));
          y = std::round(clamp_pos(y + motion_rng.normal(0.0, cfg.motion.sigma), th, H));
          break;
      }
      if (cfg.appearance_drift > 0.0) {
        const Texture fresh = make_texture(tw, th, 7.0, 2, drift_rng);
        for (int c = 0; c < 3; ++c)
          for (size_t k = 0; k < target.ch[c].size(); ++k)
            target.ch[c][k] = static_cast<float>(keep * target.ch[c][k] +
                                                 cfg.appearance_drift * fresh.ch[c][k]);
      }
      for (auto& d : decoys) {
        d.x = clamp_pos(d.x + motion_rng.normal(0.0, 1.5), tw, W);
        d.y = clamp_pos(d.y + motion_rng.normal(0.0, 1.5), th, H);
      }
    }

    Image frame(W, H, 3);
    blit(frame, background, bg_pal, 0, 0, 0);
    for (const auto& d : decoys) {
      blit(frame, d.tex, tg_pal, static_cast<int>(std::round(d.x)), static_cast<int>(std::round(d.y)), 0);
    }
    int hidden_cols = 0;
    if (cfg.occlusion && f >= cfg.occlusion->start &&
        f < cfg.occlusion->start + cfg.occlusion->duration) {
      hidden_cols = static_cast<int>(std::lround(cfg.occlusion->coverage * tw));
    }
    const int ix = static_cast<int>(x), iy = static_cast<int>(y);
    blit(frame, target, tg_pal, ix, iy, hidden_cols);
    // Occluder: the background texture shows through the hidden columns.
    seq.frames.push_back(std::move(frame));
    seq.groundtruth.push_back(Rect{x, y, double(tw), double(th)});
    seq.visible_pixels.push_back((tw - hidden_cols) * th);
  }
  return seq;
}

std::vector<std::string> preset_names() { return {"easy", "drift-prone", "occlusion"}; }

std::vector<SynthConfig> preset_suite(const std::string& name, std::uint64_t seed) {
  Rng rng(seed ^ 0x9E3779B97F4A7C15ull);
  std::vector<SynthConfig> suite;
  auto base = [&](const std::string& prefix, int i) {
    SynthConfig c;
    c.name = prefix + "-" + (i < 10 ? "0" : "") + std::to_string(i);
    c.frame_width = 160;
    c.frame_height = 160;
    c.length = 40;
    const int side = 32 + 4 * rng.uniform_int(0, 3);
    c.target_width = side;
    c.target_height = side;
    c.seed = rng.next_u64();
    return c;
  };
  if (name == "easy") {
    for (int i = 0; i < 10; ++i) {
      SynthConfig c = base("easy", i);
      if (i % 2 == 0) {
        c.motion = Motion::still();
      } else {
        c.motion = Motion::linear(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
      }
      suite.push_back(c);
    }
  } else if (name == "drift-prone") {
    for (int i = 0; i < 8; ++i) {
      SynthConfig c = base("drift", i);
      c.motion = Motion::random_walk(2.0);
      c.appearance_drift = 0.3;
      c.distractors = 1;
      suite.push_back(c);
    }
  } else if (name == "occlusion") {
    for (int i = 0; i < 6; ++i) {
      SynthConfig c = base("occl", i);
      c.motion = Motion::linear(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8));
      c.occlusion = Occlusion{15, 8, 0.5};
      suite.push_back(c);
    }
  } else {
    throw UsageError("unknown preset '" + name + "'");
  }
  return suite;
}

std::vector<Image> random_patches(const std::vector<Image>& frames, int count, int size,
                                  std::uint64_t seed) {
  if (frames.empty()) throw DataError("no frames to cut patches from");
  Rng rng(seed);
  std::vector<Image> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const Image& f = frames[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(frames.size()) - 1))];
    const double side = rng.uniform(0.25, 0.6) * std::min(f.width, f.height);
    const double cx = rng.uniform(0.5 * side, f.width - 0.5 * side);
    const double cy = rng.uniform(0.5 * side, f.height - 0.5 * side);
    out.push_back(resample_region(f, Rect::from_center(cx, cy, side, side), size));
  }
  return out;
}

}  // namespace rpn2t
