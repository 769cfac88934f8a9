#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <vector>

#include "rpn2t/frame_tracker.hpp"
#include "rpn2t/geometry.hpp"
#include "rpn2t/image.hpp"
#include "rpn2t/losses.hpp"
#include "rpn2t/netspec.hpp"
#include "rpn2t/ops.hpp"

namespace rpn2t {

struct TrackerConfig {
  int n_pos_init = 500;
  int n_neg_init = 5000;
  int init_iters = 30;
  int n_candidates = 256;
  double trans_sigma = 0.6;
  double scale_step = 1.05;
  double scale_sigma = 0.5;
  double pos_iou = 0.7;
  double neg_iou = 0.3;
  double success_threshold = 0.5;
  int short_memory = 20;
  int long_memory = 100;
  int long_interval = 10;
  int update_iters = 10;
  int per_frame_pos = 50;
  int per_frame_neg = 200;
  int minibatch_pos = 32;
  int minibatch_neg = 96;
  int hard_neg_pool = 1024;
  double lr_init = 1e-3;
  double lr_update = 2e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;

  int head_channels = 256;
  int top_k = 5;
  double failure_expand = 1.5;
  int feature_batch = 64;
  PixelNorm norm;
  std::uint64_t seed = 0;

  void validate() const;
  // Desk-scale profile used with the tiny backbone: narrower head, fewer
  // samples. Everything not listed keeps the defaults above.
  static TrackerConfig tiny();
};

/// Square crop of side max(w, h) * patch/anchor centred on `box`, bilinearly
/// resampled to out_size x out_size (edges replicated).
Image extract_patch(const Image& image, const Rect& box, int out_size,
                    const AnchorGridConfig& grid = {});
Rect patch_region(const Rect& box, const AnchorGridConfig& grid = {});

/// 3x3 conv -> relu -> two sibling 1x1 convs producing 2-way logit maps.
class HeadNet {
 public:
  struct Cache {
    Tensor input;
    Tensor hidden;  // post-relu
  };

  HeadNet() = default;
  HeadNet(int in_channels, int mid_channels, Rng& rng);
  explicit HeadNet(WeightSet weights);

  ScoreMaps forward(const Tensor& features, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const ScoreMaps& grad);
  std::vector<Tensor*> parameters();
  void zero_grad();

  const WeightSet& weights() const { return weights_; }
  int in_channels() const;

 private:
  WeightSet weights_;
};

// (alpha * mean object-probability of `a_cells` in the a-branch + beta * the
// same over `q_cells` in the q-branch) / (alpha + beta), per batch item.
std::vector<double> combine_scores(const ScoreMaps& maps, const std::vector<GridPos>& a_cells,
                                   const std::vector<GridPos>& q_cells, double alpha,
                                   double beta);

// Mean box of the `k` highest scores (ties keep the lower index first).
Rect top_k_mean(const std::vector<Rect>& boxes, const std::vector<double>& scores, int k);

/// Samples stored for one frame: backbone features of positive and negative
/// boxes, [N, C, G, G] each.
struct FrameSamples {
  int frame = 0;
  Tensor pos;
  Tensor neg;
};

/// Ring of the most recent `capacity` frames' samples, oldest evicted first.
class SampleMemory {
 public:
  explicit SampleMemory(int capacity = 1) : capacity_(capacity) {}
  void push(std::shared_ptr<const FrameSamples> s);
  int frames() const { return static_cast<int>(items_.size()); }
  int capacity() const { return capacity_; }
  Tensor gather_pos() const;
  Tensor gather_neg() const;
  const std::deque<std::shared_ptr<const FrameSamples>>& items() const { return items_; }

 private:
  int capacity_;
  std::deque<std::shared_ptr<const FrameSamples>> items_;
};

struct StepResult {
  Rect box;
  double score = 0.0;
  bool success = false;
};

/// Online tracker. The backbone is shared read-only; only the head trains.
class Tracker : public FrameTracker {
 public:
  Tracker(std::shared_ptr<const Network> backbone, TrackerConfig cfg, Rpn2tConfig loss = {},
          AnchorGridConfig grid = {});

  void initialize(const Image& frame, const Rect& box) override;
  Rect update(const Image& frame) override { return step(frame).box; }
  StepResult step(const Image& frame);

  // Scores for arbitrary boxes on `frame` under the current head.
  std::vector<double> score_boxes(const Image& frame, const std::vector<Rect>& boxes) const;

  const Rect& current_box() const { return box_; }
  int frame_index() const { return frame_index_; }
  const HeadNet& head() const { return head_; }
  const SampleMemory& short_memory() const { return short_mem_; }
  const SampleMemory& long_memory() const { return long_mem_; }
  const TrackerConfig& config() const { return cfg_; }
  double current_trans_sigma() const { return trans_sigma_; }
  // Loss of the last SGD step of the most recent training round.
  double last_loss() const { return last_loss_; }

  Tensor features(const Image& frame, const std::vector<Rect>& boxes) const;
  std::vector<double> score_features(const Tensor& features) const;

 private:
  void train(const Tensor& pos, const Tensor& neg, int iters, double lr, bool hard_mining);
  void harvest(const Image& frame, const Rect& box);
  Rect clamp_to_image(const Rect& r) const;

  std::shared_ptr<const Network> backbone_;
  TrackerConfig cfg_;
  Rpn2tConfig loss_;
  AnchorGridConfig grid_;
  std::vector<GridPos> a_cells_, q_cells_;
  LabelMap a_pos_, a_neg_, q_pos_, q_neg_;

  HeadNet head_;
  SgdOptimizer opt_;
  Rng rng_;
  Rect box_;
  int frame_index_ = -1;
  int image_w_ = 0, image_h_ = 0;
  double trans_sigma_ = 0.0;
  double last_loss_ = 0.0;
  SampleMemory short_mem_, long_mem_;
};

struct TrackResult {
  std::vector<Rect> boxes;
  std::vector<double> scores;
  std::vector<bool> success;
};

/// Initialises on frames[0] with gt0 and steps through the rest. Frame 0's box
/// is gt0 and its score is the trained head's score for gt0.
TrackResult track_sequence(const std::vector<Image>& frames, const Rect& gt0,
                           std::shared_ptr<const Network> backbone, const TrackerConfig& cfg,
                           const Rpn2tConfig& loss = {}, const AnchorGridConfig& grid = {});

}  // namespace rpn2t
