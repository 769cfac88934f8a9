#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rpn2t/geometry.hpp"
#include "rpn2t/tensor.hpp"

namespace rpn2t {

/// Head outputs for a batch. Logit maps are [N, 2, G, G] with channel 1 the
/// object class; `reg` is [N, 4, G, G] holding (tx, ty, tw, th) per anchor.
template <typename T>
struct BasicScoreMaps {
  BasicTensor<T> a_logits;
  BasicTensor<T> q_logits;
  std::optional<BasicTensor<T>> reg;

  int batch() const { return a_logits.dim(0); }
  int grid() const { return a_logits.dim(2); }
};
using ScoreMaps = BasicScoreMaps<float>;

struct BoxDelta {
  double tx = 0.0;
  double ty = 0.0;
  double tw = 0.0;
  double th = 0.0;
};

// Center offsets normalised by anchor size, log size ratios.
BoxDelta box_delta(const Rect& anchor, const Rect& gt);
Rect apply_delta(const Rect& anchor, const BoxDelta& delta);

/// Regression targets for one sample; cells without a target hold nullopt.
struct BoxDeltaMap {
  int grid_size = 0;
  std::vector<std::optional<BoxDelta>> cells;

  explicit BoxDeltaMap(int g = 0)
      : grid_size(g), cells(static_cast<size_t>(g) * static_cast<size_t>(g)) {}
};

struct RpnConfig {
  double lambda = 10.0;
  double tau = 0.7;
  void validate() const;
};

struct Rpn2tConfig {
  double alpha = 1.0;
  double beta = 10.0;
  MatchScheme scheme_a = MatchScheme::anchor_matched(0.7);
  MatchScheme scheme_q = MatchScheme::all_positions();
  void validate() const;
};

template <typename T>
struct LossResult {
  T value = 0;
  T cls = 0;  // the a-branch cross entropy term (unweighted)
  T aux = 0;  // q-branch cross entropy (rpn2t) or regression term (rpn)
  BasicScoreMaps<T> grad;  // same layout as the input maps
};

/// Anchor-based detection loss: mean cross entropy of `a_logits` over the
/// non-Ignore cells plus lambda times the smooth-L1 regression error averaged
/// over Positive cells (summed over the four coordinates). With no Positive
/// cell the regression term is exactly zero.
template <typename T>
LossResult<T> rpn_loss(const BasicScoreMaps<T>& maps, std::span<const LabelMap> labels,
                       std::span<const BoxDeltaMap> reg_targets, const RpnConfig& cfg);

/// Dual classification loss: alpha * CE(a, labels_a) + beta * CE(q, labels_q),
/// each CE a mean over its own non-Ignore cells. A branch whose maps are all
/// Ignore contributes nothing; both empty is an error.
template <typename T>
LossResult<T> rpn2t_loss(const BasicScoreMaps<T>& maps, std::span<const LabelMap> labels_a,
                         std::span<const LabelMap> labels_q, const Rpn2tConfig& cfg);

}  // namespace rpn2t
