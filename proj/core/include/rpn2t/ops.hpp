#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rpn2t/geometry.hpp"
#include "rpn2t/tensor.hpp"

namespace rpn2t {

// floor((in + 2*pad - kernel) / stride) + 1, or the ceil variant. In ceil mode
// the last window must start inside the input or the left padding.
int pooled_size(int in, int kernel, int stride, int pad, bool ceil_mode);

// Forward pass of a 2-D convolution on NCHW input. `weights` is
// [out_c, in_c, k, k]; `bias` is [out_c].
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                      const BasicTensor<T>& bias, int stride, int pad);

// Accumulates dL/dweights and dL/dbias into the parameters' grad buffers and
// returns dL/dinput (empty when `need_input_grad` is false).
template <typename T>
BasicTensor<T> conv2d_backward(const BasicTensor<T>& input, BasicTensor<T>& weights,
                               BasicTensor<T>& bias, int stride, int pad,
                               const BasicTensor<T>& grad_output,
                               bool need_input_grad = true);

template <typename T>
struct PoolResult {
  BasicTensor<T> output;
  // Linear input index (within one N*C plane) of each output's maximum.
  std::vector<std::int32_t> argmax;
};

template <typename T>
PoolResult<T> maxpool2d(const BasicTensor<T>& input, int kernel, int stride, int pad,
                        bool ceil_mode);

template <typename T>
BasicTensor<T> maxpool2d_backward(const std::vector<int>& input_shape,
                                  const PoolResult<T>& forward,
                                  const BasicTensor<T>& grad_output);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);

// Gradient through relu given the forward *output*.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_output);

/// Two-way softmax cross entropy over [N, 2, G, G] logits, channel 1 being
/// "object". `labels` holds one map per batch item, or a single map shared by
/// all items. The loss is the mean over non-Ignore cells; Ignore cells get no
/// loss and no gradient. When `grad_logits` is given, `grad_scale * dL/dlogits`
/// is added to it (it is zero-initialised if empty).
///
/// Throws UsageError("empty loss support") if every cell is Ignore.
template <typename T>
T softmax2_ce(const BasicTensor<T>& logits, std::span<const LabelMap> labels,
              BasicTensor<T>* grad_logits = nullptr, T grad_scale = T(1));

// Number of cells softmax2_ce would average over.
int loss_support(std::span<const LabelMap> labels, int batch);

/// Mean elementwise smooth-L1: 0.5 d^2 for |d| < 1, |d| - 0.5 otherwise.
template <typename T>
T smooth_l1(const BasicTensor<T>& pred, const BasicTensor<T>& target,
            BasicTensor<T>* grad_pred = nullptr, T grad_scale = T(1));

template <typename T>
T smooth_l1_scalar(T d);

struct SgdConfig {
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

/// Momentum SGD over a fixed parameter list. Velocities live here so the
/// parameter tensors stay plain values.
///
///   v <- momentum * v + grad + weight_decay * param
///   param <- param - lr * v
///
/// A step whose update would produce any non-finite value throws NumericError
/// and leaves parameters and velocities untouched.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdConfig cfg = {}) : cfg_(cfg) {}

  void step(std::span<Tensor* const> params);
  void set_lr(double lr) { cfg_.lr = lr; }
  const SgdConfig& config() const { return cfg_; }
  void reset() { velocity_.clear(); }

 private:
  SgdConfig cfg_;
  std::vector<std::vector<float>> velocity_;
};

}  // namespace rpn2t
