#include "rpn2t/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "rpn2t/error.hpp"

namespace rpn2t {

int pooled_size(int in, int kernel, int stride, int pad, bool ceil_mode) {
  if (kernel < 1 || stride < 1 || pad < 0) throw UsageError("invalid window parameters");
  const int span = in + 2 * pad - kernel;
  if (span < 0) return 0;
  if (!ceil_mode) return span / stride + 1;
  int out = (span + stride - 1) / stride + 1;
  if ((out - 1) * stride >= in + pad) --out;
  return out;
}

namespace {

struct ConvDims {
  int n, c, h, w;       // input
  int oc, k;            // filters
  int oh, ow;           // output
  int q() const { return c * k * k; }
  int p() const { return oh * ow; }
};

template <typename T>
ConvDims conv_dims(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                   const BasicTensor<T>& bias, int stride, int pad) {
  if (input.rank() != 4 || weights.rank() != 4 || bias.rank() != 1) {
    throw UsageError("conv2d expects NCHW input, OIHW weights and 1-D bias");
  }
  if (stride < 1 || pad < 0) throw UsageError("conv2d stride must be >= 1 and pad >= 0");
  ConvDims d{input.dim(0), input.dim(1), input.dim(2), input.dim(3),
             weights.dim(0), weights.dim(2), 0, 0};
  if (weights.dim(1) != d.c || weights.dim(3) != d.k || bias.dim(0) != d.oc) {
    throw UsageError("conv2d shape mismatch: input " + shape_string(input.shape()) +
                     ", weights " + shape_string(weights.shape()) + ", bias " +
                     shape_string(bias.shape()));
  }
  d.oh = pooled_size(d.h, d.k, stride, pad, false);
  d.ow = pooled_size(d.w, d.k, stride, pad, false);
  if (d.oh <= 0 || d.ow <= 0) throw UsageError("conv2d output size is not positive");
  return d;
}

bool is_pointwise(const ConvDims& d, int stride, int pad) {
  return d.k == 1 && stride == 1 && pad == 0;
}

template <typename T>
void im2col(const T* img, const ConvDims& d, int stride, int pad, T* col) {
  const int p = d.p();
  for (int c = 0; c < d.c; ++c) {
    for (int ky = 0; ky < d.k; ++ky) {
      for (int kx = 0; kx < d.k; ++kx) {
        T* row = col + static_cast<size_t>((c * d.k + ky) * d.k + kx) * p;
        for (int oy = 0; oy < d.oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          T* dst = row + static_cast<size_t>(oy) * d.ow;
          if (iy < 0 || iy >= d.h) {
            std::fill(dst, dst + d.ow, T(0));
            continue;
          }
          const T* src = img + (static_cast<size_t>(c) * d.h + iy) * d.w;
          for (int ox = 0; ox < d.ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < d.w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, const ConvDims& d, int stride, int pad, T* img) {
  const int p = d.p();
  for (int c = 0; c < d.c; ++c) {
    for (int ky = 0; ky < d.k; ++ky) {
      for (int kx = 0; kx < d.k; ++kx) {
        const T* row = col + static_cast<size_t>((c * d.k + ky) * d.k + kx) * p;
        for (int oy = 0; oy < d.oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= d.h) continue;
          const T* src = row + static_cast<size_t>(oy) * d.ow;
          T* dst = img + (static_cast<size_t>(c) * d.h + iy) * d.w;
          for (int ox = 0; ox < d.ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < d.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// Eight interleaved partial sums; fixed order, so results are reproducible.
template <typename T>
T dot(const T* a, const T* b, size_t n) {
  T acc[8] = {};
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  }
  T s = 0;
  for (; i < n; ++i) s += a[i] * b[i];
  for (int j = 0; j < 8; ++j) s += acc[j];
  return s;
}

// out[oc][p] += sum_q w[oc][q] * col[q][p]. Register tiles of 2 rows x 16
// columns; every output element still sums q in ascending order.
template <typename T>
void gemm_accumulate(const T* w, const T* col, int oc_count, int q_count, int p_count,
                     T* out) {
  constexpr int R = 2, W = 16;
  const size_t P = static_cast<size_t>(p_count);
  const size_t Q = static_cast<size_t>(q_count);
  int p0 = 0;
  for (; p0 + W <= p_count; p0 += W) {
    int oc = 0;
    for (; oc + R <= oc_count; oc += R) {
      T acc[R][W];
      for (int r = 0; r < R; ++r)
        for (int j = 0; j < W; ++j) acc[r][j] = out[(oc + r) * P + p0 + j];
      const T* w0 = w + oc * Q;
      const T* w1 = w0 + Q;
      for (size_t q = 0; q < Q; ++q) {
        const T* c = col + q * P + p0;
        const T a0 = w0[q], a1 = w1[q];
        for (int j = 0; j < W; ++j) {
          acc[0][j] += a0 * c[j];
          acc[1][j] += a1 * c[j];
        }
      }
      for (int r = 0; r < R; ++r)
        for (int j = 0; j < W; ++j) out[(oc + r) * P + p0 + j] = acc[r][j];
    }
    for (; oc < oc_count; ++oc) {
      T acc[W];
      for (int j = 0; j < W; ++j) acc[j] = out[oc * P + p0 + j];
      const T* wr = w + oc * Q;
      for (size_t q = 0; q < Q; ++q) {
        const T* c = col + q * P + p0;
        for (int j = 0; j < W; ++j) acc[j] += wr[q] * c[j];
      }
      for (int j = 0; j < W; ++j) out[oc * P + p0 + j] = acc[j];
    }
  }
  if (p0 == p_count) return;
  for (int oc = 0; oc < oc_count; ++oc) {
    T* o = out + oc * P;
    const T* wr = w + oc * Q;
    for (size_t q = 0; q < Q; ++q) {
      const T* cr = col + q * P;
      for (size_t i = static_cast<size_t>(p0); i < P; ++i) o[i] += wr[q] * cr[i];
    }
  }
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                      const BasicTensor<T>& bias, int stride, int pad) {
  const ConvDims d = conv_dims(input, weights, bias, stride, pad);
  BasicTensor<T> out({d.n, d.oc, d.oh, d.ow});
  const size_t P = static_cast<size_t>(d.p());
  const size_t in_item = static_cast<size_t>(d.c) * d.h * d.w;
  const size_t out_item = static_cast<size_t>(d.oc) * P;
  const bool pointwise = is_pointwise(d, stride, pad);
  std::vector<T> col(pointwise ? 0 : static_cast<size_t>(d.q()) * P);

  for (int n = 0; n < d.n; ++n) {
    const T* img = input.ptr() + n * in_item;
    T* o = out.ptr() + n * out_item;
    for (int oc = 0; oc < d.oc; ++oc) std::fill(o + oc * P, o + (oc + 1) * P, bias[oc]);
    const T* c = img;
    if (!pointwise) {
      im2col(img, d, stride, pad, col.data());
      c = col.data();
    }
    gemm_accumulate(weights.ptr(), c, d.oc, d.q(), d.p(), o);
  }
  return out;
}

template <typename T>
BasicTensor<T> conv2d_backward(const BasicTensor<T>& input, BasicTensor<T>& weights,
                               BasicTensor<T>& bias, int stride, int pad,
                               const BasicTensor<T>& grad_output, bool need_input_grad) {
  const ConvDims d = conv_dims(input, weights, bias, stride, pad);
  if (grad_output.shape() != std::vector<int>{d.n, d.oc, d.oh, d.ow}) {
    throw UsageError("conv2d_backward: gradient shape mismatch");
  }
  const int Q = d.q();
  const size_t P = static_cast<size_t>(d.p());
  const size_t in_item = static_cast<size_t>(d.c) * d.h * d.w;
  const size_t out_item = static_cast<size_t>(d.oc) * P;
  const bool pointwise = is_pointwise(d, stride, pad);

  auto gw = weights.grad();
  auto gb = bias.grad();
  BasicTensor<T> grad_in;
  if (need_input_grad) grad_in = BasicTensor<T>(input.shape());

  std::vector<T> col(pointwise ? 0 : static_cast<size_t>(Q) * P);
  std::vector<T> gcol(static_cast<size_t>(Q) * P);
  std::vector<T> colt(static_cast<size_t>(Q) * P);
  std::vector<T> wt;  // weights transposed to [Q, oc]
  if (need_input_grad) {
    wt.resize(static_cast<size_t>(Q) * d.oc);
    for (int oc = 0; oc < d.oc; ++oc)
      for (int q = 0; q < Q; ++q) wt[static_cast<size_t>(q) * d.oc + oc] = weights.ptr()[static_cast<size_t>(oc) * Q + q];
  }

  for (int n = 0; n < d.n; ++n) {
    const T* img = input.ptr() + n * in_item;
    const T* go = grad_output.ptr() + n * out_item;
    const T* c = img;
    if (!pointwise) {
      im2col(img, d, stride, pad, col.data());
      c = col.data();
    }
    for (int oc = 0; oc < d.oc; ++oc) {
      const T* g = go + oc * P;
      T sb = 0;
      for (size_t i = 0; i < P; ++i) sb += g[i];
      gb[oc] += sb;
    }
    for (int q = 0; q < Q; ++q)
      for (size_t i = 0; i < P; ++i) colt[i * Q + q] = c[q * P + i];
    gemm_accumulate(go, colt.data(), d.oc, d.p(), Q, gw.data());
    if (!need_input_grad) continue;
    std::fill(gcol.begin(), gcol.end(), T(0));
    gemm_accumulate(wt.data(), go, Q, d.oc, d.p(), gcol.data());
    T* gi = grad_in.ptr() + n * in_item;
    if (pointwise) {
      std::copy(gcol.begin(), gcol.end(), gi);
    } else {
      col2im(gcol.data(), d, stride, pad, gi);
    }
  }
  return grad_in;
}

template <typename T>
PoolResult<T> maxpool2d(const BasicTensor<T>& input, int kernel, int stride, int pad,
                        bool ceil_mode) {
  if (input.rank() != 4) throw UsageError("maxpool2d expects NCHW input");
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int oh = pooled_size(H, kernel, stride, pad, ceil_mode);
  const int ow = pooled_size(W, kernel, stride, pad, ceil_mode);
  if (oh <= 0 || ow <= 0) throw UsageError("maxpool2d output size is not positive");

  PoolResult<T> r{BasicTensor<T>({N, C, oh, ow}),
                  std::vector<std::int32_t>(static_cast<size_t>(N) * C * oh * ow)};
  size_t o = 0;
  for (int plane = 0; plane < N * C; ++plane) {
    const T* src = input.ptr() + static_cast<size_t>(plane) * H * W;
    for (int oy = 0; oy < oh; ++oy) {
      const int y0 = std::max(oy * stride - pad, 0);
      const int y1 = std::min(oy * stride - pad + kernel, H);
      for (int ox = 0; ox < ow; ++ox, ++o) {
        const int x0 = std::max(ox * stride - pad, 0);
        const int x1 = std::min(ox * stride - pad + kernel, W);
        T best = -std::numeric_limits<T>::infinity();
        std::int32_t arg = -1;
        for (int y = y0; y < y1; ++y) {
          for (int x = x0; x < x1; ++x) {
            const T v = src[y * W + x];
            if (arg < 0 || v > best) {
              best = v;
              arg = y * W + x;
            }
          }
        }
        r.output[o] = arg < 0 ? T(0) : best;
        r.argmax[o] = arg;
      }
    }
  }
  return r;
}

template <typename T>
BasicTensor<T> maxpool2d_backward(const std::vector<int>& input_shape,
                                  const PoolResult<T>& forward,
                                  const BasicTensor<T>& grad_output) {
  if (grad_output.shape() != forward.output.shape()) {
    throw UsageError("maxpool2d_backward: gradient shape mismatch");
  }
  BasicTensor<T> gi(input_shape);
  const size_t plane_in = static_cast<size_t>(input_shape[2]) * input_shape[3];
  const size_t plane_out =
      static_cast<size_t>(forward.output.dim(2)) * forward.output.dim(3);
  for (size_t o = 0; o < grad_output.numel(); ++o) {
    const auto arg = forward.argmax[o];
    if (arg < 0) continue;
    gi[(o / plane_out) * plane_in + static_cast<size_t>(arg)] += grad_output[o];
  }
  return gi;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
  BasicTensor<T> out = input;
  out.drop_grad();
  for (auto& v : out.data()) v = v > T(0) ? v : T(0);
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_output) {
  if (output.shape() != grad_output.shape()) throw UsageError("relu_backward: shape mismatch");
  BasicTensor<T> gi(output.shape());
  for (size_t i = 0; i < gi.numel(); ++i) gi[i] = output[i] > T(0) ? grad_output[i] : T(0);
  return gi;
}

int loss_support(std::span<const LabelMap> labels, int batch) {
  if (labels.empty()) return 0;
  if (labels.size() == 1) return batch * (labels[0].cells() - labels[0].count(Label::Ignore));
  int s = 0;
  for (const auto& m : labels) s += m.cells() - m.count(Label::Ignore);
  return s;
}

template <typename T>
T softmax2_ce(const BasicTensor<T>& logits, std::span<const LabelMap> labels,
              BasicTensor<T>* grad_logits, T grad_scale) {
  if (logits.rank() != 4 || logits.dim(1) != 2 || logits.dim(2) != logits.dim(3)) {
    throw UsageError("softmax2_ce expects [N, 2, G, G] logits");
  }
  const int N = logits.dim(0), G = logits.dim(2), cells = G * G;
  if (labels.size() != 1 && labels.size() != static_cast<size_t>(N)) {
    throw UsageError("softmax2_ce: need one label map per item or a shared one");
  }
  for (const auto& m : labels) {
    if (m.grid_size() != G) throw UsageError("softmax2_ce: label grid does not match logits");
  }
  const int support = loss_support(labels, N);
  if (support == 0) throw UsageError("empty loss support");

  if (grad_logits) {
    if (grad_logits->empty()) *grad_logits = BasicTensor<T>(logits.shape());
    if (grad_logits->shape() != logits.shape()) {
      throw UsageError("softmax2_ce: gradient buffer shape mismatch");
    }
  }
  const T inv = T(1) / static_cast<T>(support);
  T total = 0;
  for (int n = 0; n < N; ++n) {
    const LabelMap& m = labels.size() == 1 ? labels[0] : labels[static_cast<size_t>(n)];
    const T* bg = logits.ptr() + static_cast<size_t>(n) * 2 * cells;
    const T* fg = bg + cells;
    for (int i = 0; i < cells; ++i) {
      const Label l = m.at(i);
      if (l == Label::Ignore) continue;
      const T y = l == Label::Positive ? T(1) : T(0);
      const T hi = std::max(bg[i], fg[i]);
      const T lse = hi + std::log(std::exp(bg[i] - hi) + std::exp(fg[i] - hi));
      total += lse - (l == Label::Positive ? fg[i] : bg[i]);
      if (grad_logits) {
        const T p_fg = std::exp(fg[i] - lse);
        const T p_bg = std::exp(bg[i] - lse);
        T* g = grad_logits->ptr() + static_cast<size_t>(n) * 2 * cells;
        g[i] += grad_scale * inv * (p_bg - (T(1) - y));
        g[cells + i] += grad_scale * inv * (p_fg - y);
      }
    }
  }
  return total * inv;
}

template <typename T>
T smooth_l1_scalar(T d) {
  const T a = std::abs(d);
  return a < T(1) ? T(0.5) * d * d : a - T(0.5);
}

template <typename T>
T smooth_l1(const BasicTensor<T>& pred, const BasicTensor<T>& target,
            BasicTensor<T>* grad_pred, T grad_scale) {
  if (pred.shape() != target.shape()) throw UsageError("smooth_l1: shape mismatch");
  if (pred.numel() == 0) throw UsageError("smooth_l1: empty input");
  if (grad_pred) {
    if (grad_pred->empty()) *grad_pred = BasicTensor<T>(pred.shape());
    if (grad_pred->shape() != pred.shape()) throw UsageError("smooth_l1: gradient shape mismatch");
  }
  const T inv = T(1) / static_cast<T>(pred.numel());
  T total = 0;
  for (size_t i = 0; i < pred.numel(); ++i) {
    const T d = pred[i] - target[i];
    total += smooth_l1_scalar(d);
    if (grad_pred) {
      const T g = std::abs(d) < T(1) ? d : (d > 0 ? T(1) : T(-1));
      (*grad_pred)[i] += grad_scale * inv * g;
    }
  }
  return total * inv;
}

void SgdOptimizer::step(std::span<Tensor* const> params) {
  if (velocity_.size() != params.size()) {
    velocity_.assign(params.size(), {});
  }
  std::vector<std::vector<float>> new_v(params.size());
  std::vector<std::vector<float>> new_p(params.size());
  const float lr = static_cast<float>(cfg_.lr);
  const float mom = static_cast<float>(cfg_.momentum);
  const float wd = static_cast<float>(cfg_.weight_decay);
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    auto& v = velocity_[i];
    if (v.size() != p.numel()) v.assign(p.numel(), 0.0f);
    const auto g = std::as_const(p).grad();
    const bool has_grad = g.size() == p.numel();
    new_v[i].resize(p.numel());
    new_p[i].resize(p.numel());
    for (size_t k = 0; k < p.numel(); ++k) {
      const float gk = has_grad ? g[k] : 0.0f;
      const float vk = mom * v[k] + gk + wd * p[k];
      const float pk = p[k] - lr * vk;
      if (!std::isfinite(vk) || !std::isfinite(pk)) {
        throw NumericError("non-finite parameter update");
      }
      new_v[i][k] = vk;
      new_p[i][k] = pk;
    }
  }
  for (size_t i = 0; i < params.size(); ++i) {
    velocity_[i] = std::move(new_v[i]);
    std::copy(new_p[i].begin(), new_p[i].end(), params[i]->data().begin());
  }
}

#define RPN2T_INSTANTIATE(T)                                                              \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&,            \
                                 const BasicTensor<T>&, int, int);                        \
  template BasicTensor<T> conv2d_backward(const BasicTensor<T>&, BasicTensor<T>&,         \
                                          BasicTensor<T>&, int, int,                      \
                                          const BasicTensor<T>&, bool);                   \
  template PoolResult<T> maxpool2d(const BasicTensor<T>&, int, int, int, bool);           \
  template BasicTensor<T> maxpool2d_backward(const std::vector<int>&,                     \
                                             const PoolResult<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                    \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);    \
  template T softmax2_ce(const BasicTensor<T>&, std::span<const LabelMap>,                \
                         BasicTensor<T>*, T);                                             \
  template T smooth_l1_scalar(T);                                                         \
  template T smooth_l1(const BasicTensor<T>&, const BasicTensor<T>&, BasicTensor<T>*, T);

RPN2T_INSTANTIATE(float)
RPN2T_INSTANTIATE(double)

#undef RPN2T_INSTANTIATE

}  // namespace rpn2t
