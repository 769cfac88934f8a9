#include "rpn2t/losses.hpp"

#include <cmath>

#include "rpn2t/error.hpp"
#include "rpn2t/ops.hpp"

namespace rpn2t {

BoxDelta box_delta(const Rect& anchor, const Rect& gt) {
  validate(anchor);
  validate(gt);
  return BoxDelta{(gt.cx() - anchor.cx()) / anchor.w, (gt.cy() - anchor.cy()) / anchor.h,
                  std::log(gt.w / anchor.w), std::log(gt.h / anchor.h)};
}

Rect apply_delta(const Rect& anchor, const BoxDelta& d) {
  validate(anchor);
  const double w = anchor.w * std::exp(d.tw);
  const double h = anchor.h * std::exp(d.th);
  return Rect::from_center(anchor.cx() + d.tx * anchor.w, anchor.cy() + d.ty * anchor.h, w, h);
}

void RpnConfig::validate() const {
  if (!(lambda >= 0.0)) throw UsageError("lambda must be non-negative");
  if (!(tau > 0.0 && tau <= 1.0)) throw UsageError("tau must lie in (0, 1]");
}

void Rpn2tConfig::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || (alpha == 0.0 && beta == 0.0)) {
    throw UsageError("alpha and beta must be non-negative and not both zero");
  }
  scheme_a.validate();
  scheme_q.validate();
}

namespace {

template <typename T>
void check_logits(const BasicTensor<T>& t, const char* what) {
  if (t.rank() != 4 || t.dim(1) != 2 || t.dim(2) != t.dim(3)) {
    throw UsageError(std::string(what) + " must be [N, 2, G, G]");
  }
}

}  // namespace

template <typename T>
LossResult<T> rpn_loss(const BasicScoreMaps<T>& maps, std::span<const LabelMap> labels,
                       std::span<const BoxDeltaMap> reg_targets, const RpnConfig& cfg) {
  cfg.validate();
  check_logits(maps.a_logits, "a_logits");
  if (!maps.reg) throw UsageError("rpn_loss needs a regression map");
  const int N = maps.batch(), G = maps.grid(), cells = G * G;
  const auto& reg = *maps.reg;
  if (reg.shape() != std::vector<int>{N, 4, G, G}) throw UsageError("reg map must be [N, 4, G, G]");
  if (reg_targets.size() != static_cast<size_t>(N)) {
    throw UsageError("rpn_loss needs one regression target map per item");
  }

  LossResult<T> r;
  r.grad.a_logits = BasicTensor<T>(maps.a_logits.shape());
  r.grad.reg = BasicTensor<T>(reg.shape());
  r.cls = softmax2_ce(maps.a_logits, labels, &r.grad.a_logits);

  int positives = 0;
  for (int n = 0; n < N; ++n) {
    const LabelMap& m = labels.size() == 1 ? labels[0] : labels[static_cast<size_t>(n)];
    positives += m.count(Label::Positive);
  }
  T reg_sum = 0;
  if (positives > 0) {
    const T scale = static_cast<T>(cfg.lambda) / static_cast<T>(positives);
    for (int n = 0; n < N; ++n) {
      const LabelMap& m = labels.size() == 1 ? labels[0] : labels[static_cast<size_t>(n)];
      const BoxDeltaMap& tm = reg_targets[static_cast<size_t>(n)];
      if (tm.grid_size != G) throw UsageError("regression target grid mismatch");
      for (int i = 0; i < cells; ++i) {
        if (m.at(i) != Label::Positive) continue;
        const auto& target = tm.cells[static_cast<size_t>(i)];
        if (!target) throw DataError("regression target missing at a positive anchor");
        const T t[4] = {static_cast<T>(target->tx), static_cast<T>(target->ty),
                        static_cast<T>(target->tw), static_cast<T>(target->th)};
        for (int k = 0; k < 4; ++k) {
          const size_t idx = (static_cast<size_t>(n) * 4 + k) * cells + i;
          const T d = reg[idx] - t[k];
          reg_sum += smooth_l1_scalar(d);
          (*r.grad.reg)[idx] += scale * (std::abs(d) < T(1) ? d : (d > 0 ? T(1) : T(-1)));
        }
      }
    }
    r.aux = reg_sum / static_cast<T>(positives);
  }
  r.value = r.cls + static_cast<T>(cfg.lambda) * r.aux;
  if (!std::isfinite(r.value)) throw NumericError("non-finite rpn loss");
  return r;
}

template <typename T>
LossResult<T> rpn2t_loss(const BasicScoreMaps<T>& maps, std::span<const LabelMap> labels_a,
                         std::span<const LabelMap> labels_q, const Rpn2tConfig& cfg) {
  cfg.validate();
  check_logits(maps.a_logits, "a_logits");
  check_logits(maps.q_logits, "q_logits");
  if (maps.a_logits.shape() != maps.q_logits.shape()) {
    throw UsageError("a and q logit maps differ in shape");
  }
  const int N = maps.batch();
  const bool has_a = loss_support(labels_a, N) > 0;
  const bool has_q = loss_support(labels_q, N) > 0;
  if (!has_a && !has_q) throw UsageError("empty loss support");

  const T alpha = static_cast<T>(cfg.alpha);
  const T beta = static_cast<T>(cfg.beta);
  LossResult<T> r;
  r.grad.a_logits = BasicTensor<T>(maps.a_logits.shape());
  r.grad.q_logits = BasicTensor<T>(maps.q_logits.shape());
  if (has_a) r.cls = softmax2_ce(maps.a_logits, labels_a, &r.grad.a_logits, alpha);
  if (has_q) r.aux = softmax2_ce(maps.q_logits, labels_q, &r.grad.q_logits, beta);
  r.value = alpha * r.cls + beta * r.aux;
  if (!std::isfinite(r.value)) throw NumericError("non-finite rpn2t loss");
  return r;
}

template LossResult<float> rpn_loss(const BasicScoreMaps<float>&, std::span<const LabelMap>,
                                    std::span<const BoxDeltaMap>, const RpnConfig&);
template LossResult<double> rpn_loss(const BasicScoreMaps<double>&, std::span<const LabelMap>,
                                     std::span<const BoxDeltaMap>, const RpnConfig&);
template LossResult<float> rpn2t_loss(const BasicScoreMaps<float>&, std::span<const LabelMap>,
                                      std::span<const LabelMap>, const Rpn2tConfig&);
template LossResult<double> rpn2t_loss(const BasicScoreMaps<double>&, std::span<const LabelMap>,
                                       std::span<const LabelMap>, const Rpn2tConfig&);

}  // namespace rpn2t
