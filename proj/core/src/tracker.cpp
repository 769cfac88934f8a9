#include "rpn2t/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rpn2t/error.hpp"

namespace rpn2t {

void TrackerConfig::validate() const {
  const int counts[] = {n_pos_init,    n_neg_init,    init_iters,   n_candidates,
                        short_memory,  long_memory,   long_interval, update_iters,
                        per_frame_pos, per_frame_neg, minibatch_pos, minibatch_neg,
                        hard_neg_pool, head_channels, top_k,         feature_batch};
  for (int c : counts) {
    if (c < 1) throw UsageError("tracker counts must be positive");
  }
  for (double t : {pos_iou, neg_iou, success_threshold}) {
    if (!(t > 0.0 && t < 1.0)) throw UsageError("tracker thresholds must lie in (0, 1)");
  }
  if (!(pos_iou > neg_iou)) throw UsageError("pos_iou must exceed neg_iou");
  if (!(trans_sigma > 0.0) || !(scale_step >= 1.0) || !(scale_sigma >= 0.0) ||
      !(failure_expand >= 1.0)) {
    throw UsageError("invalid candidate sampling parameters");
  }
  if (!(lr_init > 0.0) || !(lr_update > 0.0) || !(momentum >= 0.0) || !(weight_decay >= 0.0)) {
    throw UsageError("invalid learning parameters");
  }
  if (short_memory > long_memory) throw UsageError("short memory must not exceed long memory");
}

TrackerConfig TrackerConfig::tiny() {
  TrackerConfig c;
  c.n_pos_init = 200;
  c.n_neg_init = 1000;
  c.n_candidates = 128;
  c.per_frame_pos = 20;
  c.per_frame_neg = 60;
  c.hard_neg_pool = 256;
  c.head_channels = 32;
  c.lr_init = 0.01;
  c.lr_update = 0.02;
  return c;
}

Rect patch_region(const Rect& box, const AnchorGridConfig& grid) {
  validate(box);
  const double side = std::max(box.w, box.h) * grid.patch_size / grid.anchor_side;
  return Rect::from_center(box.cx(), box.cy(), side, side);
}

Image extract_patch(const Image& image, const Rect& box, int out_size,
                    const AnchorGridConfig& grid) {
  if (image.empty()) throw DataError("empty image");
  return resample_region(image, patch_region(box, grid), out_size);
}

// ---------------------------------------------------------------------------
// HeadNet

HeadNet::HeadNet(int in_channels, int mid_channels, Rng& rng) {
  Tensor conv_w({mid_channels, in_channels, 3, 3});
  rng.fill_normal(conv_w, std::sqrt(2.0 / (in_channels * 9.0)));
  Tensor a_w({2, mid_channels, 1, 1});
  Tensor q_w({2, mid_channels, 1, 1});
  rng.fill_normal(a_w, 0.01);
  rng.fill_normal(q_w, 0.01);
  weights_.set("conv_a.weight", std::move(conv_w));
  weights_.set("conv_a.bias", Tensor({mid_channels}));
  weights_.set("branch_a.weight", std::move(a_w));
  weights_.set("branch_a.bias", Tensor({2}));
  weights_.set("branch_q.weight", std::move(q_w));
  weights_.set("branch_q.bias", Tensor({2}));
}

HeadNet::HeadNet(WeightSet weights) : weights_(std::move(weights)) {
  const auto& cw = weights_.get("conv_a.weight");
  if (cw.rank() != 4 || cw.dim(2) != 3 || cw.dim(3) != 3) throw DataError("bad conv_a weights");
  const int mid = cw.dim(0);
  for (const char* b : {"branch_a.weight", "branch_q.weight"}) {
    if (weights_.get(b).shape() != std::vector<int>{2, mid, 1, 1}) {
      throw DataError(std::string("bad ") + b + " shape");
    }
  }
}

int HeadNet::in_channels() const { return weights_.get("conv_a.weight").dim(1); }

ScoreMaps HeadNet::forward(const Tensor& features, Cache* cache) const {
  Tensor hidden = relu(conv2d(features, weights_.get("conv_a.weight"),
                              weights_.get("conv_a.bias"), 1, 1));
  ScoreMaps out;
  out.a_logits = conv2d(hidden, weights_.get("branch_a.weight"), weights_.get("branch_a.bias"), 1, 0);
  out.q_logits = conv2d(hidden, weights_.get("branch_q.weight"), weights_.get("branch_q.bias"), 1, 0);
  if (cache) {
    cache->input = features;
    cache->hidden = std::move(hidden);
  }
  return out;
}

void HeadNet::backward(const Cache& cache, const ScoreMaps& grad) {
  Tensor gh = conv2d_backward(cache.hidden, weights_.get("branch_a.weight"),
                              weights_.get("branch_a.bias"), 1, 0, grad.a_logits);
  const Tensor gq = conv2d_backward(cache.hidden, weights_.get("branch_q.weight"),
                                    weights_.get("branch_q.bias"), 1, 0, grad.q_logits);
  for (size_t i = 0; i < gh.numel(); ++i) gh[i] += gq[i];
  gh = relu_backward(cache.hidden, gh);
  conv2d_backward(cache.input, weights_.get("conv_a.weight"), weights_.get("conv_a.bias"), 1, 1,
                  gh, false);
}

std::vector<Tensor*> HeadNet::parameters() {
  return {&weights_.get("conv_a.weight"),   &weights_.get("conv_a.bias"),
          &weights_.get("branch_a.weight"), &weights_.get("branch_a.bias"),
          &weights_.get("branch_q.weight"), &weights_.get("branch_q.bias")};
}

void HeadNet::zero_grad() {
  for (Tensor* p : parameters()) p->zero_grad();
}

// ---------------------------------------------------------------------------
// Scoring helpers

namespace {

double object_probability(float bg, float fg) {
  return 1.0 / (1.0 + std::exp(static_cast<double>(bg) - static_cast<double>(fg)));
}

double branch_mean(const Tensor& logits, int n, const std::vector<GridPos>& cells) {
  const int G = logits.dim(2);
  double s = 0.0;
  for (const auto& p : cells) s += object_probability(logits.at(n, 0, p.y, p.x), logits.at(n, 1, p.y, p.x));
  (void)G;
  return s / static_cast<double>(cells.size());
}

}  // namespace

std::vector<double> combine_scores(const ScoreMaps& maps, const std::vector<GridPos>& a_cells,
                                   const std::vector<GridPos>& q_cells, double alpha,
                                   double beta) {
  if (!(alpha + beta > 0.0)) throw UsageError("alpha + beta must be positive");
  if (a_cells.empty() || q_cells.empty()) throw UsageError("scoring needs non-empty cell sets");
  const int N = maps.a_logits.dim(0);
  std::vector<double> out(static_cast<size_t>(N));
  for (int n = 0; n < N; ++n) {
    const double a = alpha > 0.0 ? branch_mean(maps.a_logits, n, a_cells) : 0.0;
    const double q = beta > 0.0 ? branch_mean(maps.q_logits, n, q_cells) : 0.0;
    out[static_cast<size_t>(n)] = (alpha * a + beta * q) / (alpha + beta);
  }
  return out;
}

Rect top_k_mean(const std::vector<Rect>& boxes, const std::vector<double>& scores, int k) {
  if (boxes.empty() || boxes.size() != scores.size()) throw UsageError("top_k_mean: bad input");
  std::vector<size_t> idx(boxes.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  const size_t take = std::min(boxes.size(), static_cast<size_t>(std::max(k, 1)));
  double x = 0, y = 0, w = 0, h = 0;
  for (size_t i = 0; i < take; ++i) {
    const Rect& r = boxes[idx[i]];
    x += r.x;
    y += r.y;
    w += r.w;
    h += r.h;
  }
  const double n = static_cast<double>(take);
  return Rect{x / n, y / n, w / n, h / n};
}

// ---------------------------------------------------------------------------
// SampleMemory

void SampleMemory::push(std::shared_ptr<const FrameSamples> s) {
  items_.push_back(std::move(s));
  while (static_cast<int>(items_.size()) > capacity_) items_.pop_front();
}

namespace {

Tensor concat(const std::vector<const Tensor*>& parts) {
  int total = 0;
  const Tensor* shape_src = nullptr;
  for (const Tensor* t : parts) {
    if (t->empty()) continue;
    total += t->dim(0);
    shape_src = t;
  }
  if (!shape_src) return {};
  std::vector<int> shape = shape_src->shape();
  shape[0] = total;
  Tensor out(shape);
  int at = 0;
  for (const Tensor* t : parts) {
    if (t->empty()) continue;
    out.assign_slice(at, *t);
    at += t->dim(0);
  }
  return out;
}

}  // namespace

Tensor SampleMemory::gather_pos() const {
  std::vector<const Tensor*> parts;
  for (const auto& s : items_) parts.push_back(&s->pos);
  return concat(parts);
}

Tensor SampleMemory::gather_neg() const {
  std::vector<const Tensor*> parts;
  for (const auto& s : items_) parts.push_back(&s->neg);
  return concat(parts);
}

// ---------------------------------------------------------------------------
// Box sampling

namespace {

constexpr double kMinSide = 4.0;

double clip_unit(double v) { return std::clamp(v, -1.0, 1.0); }

Rect clamp_box(Rect r, int W, int H) {
  r.w = std::clamp(r.w, kMinSide, static_cast<double>(W));
  r.h = std::clamp(r.h, kMinSide, static_cast<double>(H));
  const double cx = std::clamp(r.cx(), 0.0, static_cast<double>(W));
  const double cy = std::clamp(r.cy(), 0.0, static_cast<double>(H));
  return Rect::from_center(cx, cy, r.w, r.h);
}

// Candidate proposal: Gaussian translation with std trans * sqrt(wh) per axis,
// scale factor step^r with r ~ N(0, scale_sigma).
Rect draw_candidate(const Rect& c, double trans, double step, double scale_sigma, int W, int H,
                    Rng& rng) {
  const double s = std::sqrt(c.w * c.h);
  const double dx = rng.normal() * trans * s;
  const double dy = rng.normal() * trans * s;
  const double f = std::pow(step, rng.normal() * scale_sigma);
  return clamp_box(Rect::from_center(c.cx() + dx, c.cy() + dy, c.w * f, c.h * f), W, H);
}

// Training-sample proposal kinds.
enum class Spread { Gaussian, Uniform, Whole };

Rect draw_training_box(const Rect& c, Spread kind, double trans, double scale, int W, int H,
                       Rng& rng) {
  const double s = std::sqrt(c.w * c.h);
  switch (kind) {
    case Spread::Gaussian: {
      const double dx = trans * s * clip_unit(0.5 * rng.normal());
      const double dy = trans * s * clip_unit(0.5 * rng.normal());
      const double f = std::pow(scale, clip_unit(0.5 * rng.normal()));
      return clamp_box(Rect::from_center(c.cx() + dx, c.cy() + dy, c.w * f, c.h * f), W, H);
    }
    case Spread::Uniform: {
      const double dx = trans * s * rng.uniform(-1.0, 1.0);
      const double dy = trans * s * rng.uniform(-1.0, 1.0);
      const double f = std::pow(scale, rng.uniform(-1.0, 1.0));
      return clamp_box(Rect::from_center(c.cx() + dx, c.cy() + dy, c.w * f, c.h * f), W, H);
    }
    case Spread::Whole: {
      const double f = std::pow(scale, rng.uniform(-1.0, 1.0));
      const double w = std::min(c.w * f, static_cast<double>(W));
      const double h = std::min(c.h * f, static_cast<double>(H));
      return clamp_box(Rect::from_center(rng.uniform(0.5 * w, W - 0.5 * w),
                                         rng.uniform(0.5 * h, H - 0.5 * h), w, h),
                       W, H);
    }
  }
  return c;
}

std::vector<Rect> draw_filtered(const Rect& c, Spread kind, double trans, double scale, int count,
                                double iou_lo, double iou_hi, int W, int H, Rng& rng) {
  std::vector<Rect> out;
  out.reserve(static_cast<size_t>(count));
  const long max_tries = 200L * count + 1000;
  for (long t = 0; t < max_tries && static_cast<int>(out.size()) < count; ++t) {
    const Rect r = draw_training_box(c, kind, trans, scale, W, H, rng);
    const double o = iou(r, c);
    if (o >= iou_lo && o <= iou_hi) out.push_back(r);
  }
  return out;
}

std::vector<Rect> draw_positives(const Rect& c, int count, double pos_iou, int W, int H, Rng& rng) {
  auto pos = draw_filtered(c, Spread::Gaussian, 0.1, 1.3, count, pos_iou, 1.0, W, H, rng);
  if (static_cast<int>(pos.size()) < count) {
    // Near the frame border clamping destroys overlap; tighten the spread once.
    pos = draw_filtered(c, Spread::Gaussian, 0.05, 1.1, count, pos_iou, 1.0, W, H, rng);
  }
  if (static_cast<int>(pos.size()) < count) {
    throw DataError("cannot draw enough positive samples around the target");
  }
  return pos;
}

std::vector<Rect> draw_negatives(const Rect& c, int count, double neg_iou, bool with_whole, int W,
                                 int H, Rng& rng) {
  std::vector<Rect> neg;
  if (with_whole) {
    neg = draw_filtered(c, Spread::Uniform, 1.0, 1.6, count / 2, 0.0, neg_iou, W, H, rng);
    auto whole = draw_filtered(c, Spread::Whole, 0.0, 1.6, count - static_cast<int>(neg.size()),
                               0.0, neg_iou, W, H, rng);
    neg.insert(neg.end(), whole.begin(), whole.end());
  } else {
    neg = draw_filtered(c, Spread::Uniform, 2.0, 1.3, count, 0.0, neg_iou, W, H, rng);
  }
  if (neg.empty()) throw DataError("cannot draw negative samples");
  return neg;
}

// Cycling permutation over [0, n).
class Cycler {
 public:
  explicit Cycler(int n) : order_(static_cast<size_t>(n)) {
    std::iota(order_.begin(), order_.end(), 0);
  }
  std::vector<int> take(int k, Rng& rng) {
    std::vector<int> out;
    out.reserve(static_cast<size_t>(k));
    while (static_cast<int>(out.size()) < k) {
      if (cursor_ == order_.size()) {
        for (size_t i = order_.size(); i > 1; --i) {
          std::swap(order_[i - 1], order_[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
        }
        cursor_ = 0;
      }
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  std::vector<int> order_;
  size_t cursor_ = std::numeric_limits<size_t>::max();
};

Tensor gather_rows(const Tensor& src, const std::vector<int>& rows) {
  std::vector<int> shape = src.shape();
  shape[0] = static_cast<int>(rows.size());
  Tensor out(shape);
  const size_t item = src.numel() / static_cast<size_t>(src.dim(0));
  for (size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(src.ptr() + static_cast<size_t>(rows[i]) * item, item, out.ptr() + i * item);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tracker

Tracker::Tracker(std::shared_ptr<const Network> backbone, TrackerConfig cfg, Rpn2tConfig loss,
                 AnchorGridConfig grid)
    : backbone_(std::move(backbone)),
      cfg_(cfg),
      loss_(loss),
      grid_(grid),
      opt_(SgdConfig{cfg.lr_update, cfg.momentum, cfg.weight_decay}),
      rng_(cfg.seed),
      short_mem_(cfg.short_memory),
      long_mem_(cfg.long_memory) {
  if (!backbone_) throw UsageError("tracker needs a backbone");
  cfg_.validate();
  loss_.validate();
  grid_.validate();
  const auto& spec = backbone_->spec();
  if (output_size(spec, spec.input_size) != grid_.grid_size) {
    throw DataError("backbone output is " + std::to_string(output_size(spec, spec.input_size)) +
                    " cells, anchor grid expects " + std::to_string(grid_.grid_size));
  }
  const Rect target = canonical_target(grid_);
  a_cells_ = match_anchors(target, grid_, loss_.scheme_a);
  q_cells_ = match_anchors(target, grid_, loss_.scheme_q);
  a_pos_ = label_map(SampleClass::Positive, a_cells_, grid_);
  a_neg_ = label_map(SampleClass::Negative, a_cells_, grid_);
  q_pos_ = label_map(SampleClass::Positive, q_cells_, grid_);
  q_neg_ = label_map(SampleClass::Negative, q_cells_, grid_);
}

Rect Tracker::clamp_to_image(const Rect& r) const {
  Rect c = r;
  c.w = std::clamp(c.w, kMinSide, static_cast<double>(image_w_));
  c.h = std::clamp(c.h, kMinSide, static_cast<double>(image_h_));
  c.x = std::clamp(c.x, 0.0, image_w_ - c.w);
  c.y = std::clamp(c.y, 0.0, image_h_ - c.h);
  return c;
}

Tensor Tracker::features(const Image& frame, const std::vector<Rect>& boxes) const {
  const int S = backbone_->spec().input_size;
  const int C = backbone_->spec().input_channels;
  if (frame.channels != C) throw DataError("frame channel count does not match the backbone");
  const int G = grid_.grid_size;
  const int C5 = backbone_->spec().output_channels();
  Tensor out({static_cast<int>(boxes.size()), C5, G, G});
  for (size_t first = 0; first < boxes.size(); first += static_cast<size_t>(cfg_.feature_batch)) {
    const int n = static_cast<int>(std::min(boxes.size() - first, static_cast<size_t>(cfg_.feature_batch)));
    Tensor batch({n, C, S, S});
    for (int i = 0; i < n; ++i) {
      write_tensor(extract_patch(frame, boxes[first + static_cast<size_t>(i)], S, grid_), cfg_.norm,
                   batch, i);
    }
    out.assign_slice(static_cast<int>(first), backbone_->forward(batch));
  }
  return out;
}

std::vector<double> Tracker::score_features(const Tensor& feats) const {
  std::vector<double> scores;
  if (feats.empty()) return scores;
  scores.reserve(static_cast<size_t>(feats.dim(0)));
  const int N = feats.dim(0);
  for (int first = 0; first < N; first += cfg_.feature_batch) {
    const int n = std::min(cfg_.feature_batch, N - first);
    const auto maps = head_.forward(feats.slice(first, n));
    const auto s = combine_scores(maps, a_cells_, q_cells_, loss_.alpha, loss_.beta);
    scores.insert(scores.end(), s.begin(), s.end());
  }
  return scores;
}

std::vector<double> Tracker::score_boxes(const Image& frame, const std::vector<Rect>& boxes) const {
  if (frame_index_ < 0) throw UsageError("tracker is not initialised");
  return score_features(features(frame, boxes));
}

void Tracker::train(const Tensor& pos, const Tensor& neg, int iters, double lr, bool hard_mining) {
  if (pos.empty() || neg.empty()) return;
  const int bp = cfg_.minibatch_pos;
  const int bn = cfg_.minibatch_neg;
  Cycler pos_cycle(pos.dim(0));
  Cycler neg_cycle(neg.dim(0));
  SgdOptimizer init_opt(SgdConfig{lr, cfg_.momentum, cfg_.weight_decay});
  SgdOptimizer& opt = hard_mining || frame_index_ > 0 ? opt_ : init_opt;
  opt.set_lr(lr);

  std::vector<LabelMap> la, lq;
  la.reserve(static_cast<size_t>(bp + bn));
  lq.reserve(static_cast<size_t>(bp + bn));
  for (int i = 0; i < bp; ++i) {
    la.push_back(a_pos_);
    lq.push_back(q_pos_);
  }
  for (int i = 0; i < bn; ++i) {
    la.push_back(a_neg_);
    lq.push_back(q_neg_);
  }

  for (int it = 0; it < iters; ++it) {
    const Tensor p = gather_rows(pos, pos_cycle.take(bp, rng_));
    Tensor n;
    if (hard_mining) {
      const int pool = std::min(cfg_.hard_neg_pool, std::max(neg.dim(0), bn));
      const auto cand_rows = neg_cycle.take(pool, rng_);
      const Tensor cand = gather_rows(neg, cand_rows);
      const auto s = score_features(cand);
      std::vector<size_t> order(s.size());
      std::iota(order.begin(), order.end(), size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return s[a] > s[b]; });
      std::vector<int> hard;
      for (int i = 0; i < bn; ++i) hard.push_back(static_cast<int>(order[static_cast<size_t>(i)]));
      n = gather_rows(cand, hard);
    } else {
      n = gather_rows(neg, neg_cycle.take(bn, rng_));
    }
    const Tensor batch = concat({&p, &n});

    head_.zero_grad();
    HeadNet::Cache cache;
    const ScoreMaps maps = head_.forward(batch, &cache);
    const auto loss = rpn2t_loss(maps, std::span<const LabelMap>(la), std::span<const LabelMap>(lq), loss_);
    last_loss_ = loss.value;
    head_.backward(cache, loss.grad);
    const auto params = head_.parameters();
    opt.step(params);
  }
}

void Tracker::harvest(const Image& frame, const Rect& box) {
  auto s = std::make_shared<FrameSamples>();
  s->frame = frame_index_;
  const auto pos = draw_filtered(box, Spread::Gaussian, 0.1, 1.3, cfg_.per_frame_pos, cfg_.pos_iou,
                                 1.0, image_w_, image_h_, rng_);
  const auto neg = draw_filtered(box, Spread::Uniform, 2.0, 1.3, cfg_.per_frame_neg, 0.0,
                                 cfg_.neg_iou, image_w_, image_h_, rng_);
  if (!pos.empty()) s->pos = features(frame, pos);
  if (!neg.empty()) s->neg = features(frame, neg);
  std::shared_ptr<const FrameSamples> shared = std::move(s);
  short_mem_.push(shared);
  long_mem_.push(shared);
}

void Tracker::initialize(const Image& frame, const Rect& box) {
  if (frame.empty()) throw DataError("empty first frame");
  validate(box);
  image_w_ = frame.width;
  image_h_ = frame.height;
  if (box.x + box.w <= 0 || box.y + box.h <= 0 || box.x >= image_w_ || box.y >= image_h_) {
    throw DataError("initial box lies outside the frame");
  }
  rng_ = Rng(cfg_.seed);
  head_ = HeadNet(backbone_->spec().output_channels(), cfg_.head_channels, rng_);
  opt_ = SgdOptimizer(SgdConfig{cfg_.lr_update, cfg_.momentum, cfg_.weight_decay});
  short_mem_ = SampleMemory(cfg_.short_memory);
  long_mem_ = SampleMemory(cfg_.long_memory);
  box_ = box;
  trans_sigma_ = cfg_.trans_sigma;
  frame_index_ = 0;

  const auto pos = draw_positives(box, cfg_.n_pos_init, cfg_.pos_iou, image_w_, image_h_, rng_);
  const auto neg = draw_negatives(box, cfg_.n_neg_init, cfg_.neg_iou, true, image_w_, image_h_, rng_);
  const Tensor pos_f = features(frame, pos);
  const Tensor neg_f = features(frame, neg);
  train(pos_f, neg_f, cfg_.init_iters, cfg_.lr_init, false);
  harvest(frame, box);
}

StepResult Tracker::step(const Image& frame) {
  if (frame_index_ < 0) throw UsageError("tracker is not initialised");
  if (frame.width != image_w_ || frame.height != image_h_) {
    throw DataError("frame size changed mid-sequence");
  }
  ++frame_index_;

  std::vector<Rect> cands;
  cands.reserve(static_cast<size_t>(cfg_.n_candidates));
  for (int i = 0; i < cfg_.n_candidates; ++i) {
    cands.push_back(draw_candidate(box_, trans_sigma_, cfg_.scale_step, cfg_.scale_sigma, image_w_,
                                   image_h_, rng_));
  }
  const auto scores = score_features(features(frame, cands));
  const double best = *std::max_element(scores.begin(), scores.end());
  StepResult r;
  r.score = best;
  r.success = best > cfg_.success_threshold;

  if (r.success) {
    box_ = clamp_to_image(top_k_mean(cands, scores, cfg_.top_k));
    trans_sigma_ = cfg_.trans_sigma;
    harvest(frame, box_);
    if (frame_index_ % cfg_.long_interval == 0) {
      train(long_mem_.gather_pos(), long_mem_.gather_neg(), cfg_.update_iters, cfg_.lr_update, false);
    }
  } else {
    trans_sigma_ = cfg_.trans_sigma * cfg_.failure_expand;
    train(short_mem_.gather_pos(), short_mem_.gather_neg(), cfg_.update_iters, cfg_.lr_update, true);
  }
  r.box = box_;
  return r;
}

TrackResult track_sequence(const std::vector<Image>& frames, const Rect& gt0,
                           std::shared_ptr<const Network> backbone, const TrackerConfig& cfg,
                           const Rpn2tConfig& loss, const AnchorGridConfig& grid) {
  if (frames.empty()) throw DataError("sequence has no frames");
  Tracker tracker(std::move(backbone), cfg, loss, grid);
  tracker.initialize(frames.front(), gt0);
  TrackResult out;
  out.boxes.push_back(gt0);
  out.scores.push_back(tracker.score_boxes(frames.front(), {gt0}).front());
  out.success.push_back(true);
  for (size_t i = 1; i < frames.size(); ++i) {
    const StepResult r = tracker.step(frames[i]);
    out.boxes.push_back(r.box);
    out.scores.push_back(r.score);
    out.success.push_back(r.success);
  }
  return out;
}

}  // namespace rpn2t
