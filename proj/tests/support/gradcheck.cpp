#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rpn2t/losses.hpp"
#include "rpn2t/netspec.hpp"
#include "rpn2t/ops.hpp"
#include "rpn2t/tracker.hpp"

namespace rpn2t::testing {

double relative_error(const std::vector<double>& a, const std::vector<double>& n) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  const double denom = std::sqrt(std::max(na, nn));
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

std::vector<double> numeric_gradient(const std::function<double(const BasicTensor<double>&)>& f,
                                     const BasicTensor<double>& x, double eps) {
  std::vector<double> g(x.numel());
  BasicTensor<double> probe = x;
  for (size_t i = 0; i < x.numel(); ++i) {
    probe[i] = x[i] + eps;
    const double up = f(probe);
    probe[i] = x[i] - eps;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

std::vector<double> to_double(std::span<const float> v) { return {v.begin(), v.end()}; }

namespace {

Tensor randn(std::vector<int> shape, Rng& rng, double sd = 1.0) {
  Tensor t(std::move(shape));
  rng.fill_normal(t, sd);
  return t;
}

double weighted(const BasicTensor<double>& y, const BasicTensor<double>& r) {
  double s = 0.0;
  for (size_t i = 0; i < y.numel(); ++i) s += y[i] * r[i];
  return s;
}

using Fn = std::function<double(const BasicTensor<double>&)>;

void push(std::vector<GradCase>& out, const std::string& name, std::span<const float> analytic,
          const Fn& f, const BasicTensor<double>& x) {
  out.push_back({name, relative_error(to_double(analytic), numeric_gradient(f, x)),
                 static_cast<int>(x.numel())});
}

void conv_cases(std::vector<GradCase>& out, Rng& rng, const std::string& tag,
                std::vector<int> xs, std::vector<int> ws, int stride, int pad) {
  Tensor x = randn(xs, rng), w = randn(ws, rng), b = randn({ws[0]}, rng);
  const Tensor r = randn(conv2d(x, w, b, stride, pad).shape(), rng);
  const Tensor gx = conv2d_backward(x, w, b, stride, pad, r);
  const auto xd = x.cast<double>(), wd = w.cast<double>(), bd = b.cast<double>(), rd = r.cast<double>();
  push(out, "conv2d" + tag + " input", gx.data(),
       [&](const BasicTensor<double>& v) { return weighted(conv2d(v, wd, bd, stride, pad), rd); }, xd);
  push(out, "conv2d" + tag + " weights", std::as_const(w).grad(),
       [&](const BasicTensor<double>& v) { return weighted(conv2d(xd, v, bd, stride, pad), rd); }, wd);
  push(out, "conv2d" + tag + " bias", std::as_const(b).grad(),
       [&](const BasicTensor<double>& v) { return weighted(conv2d(xd, wd, v, stride, pad), rd); }, bd);
}

// Values spaced 0.25 apart so a 1e-3 probe never changes a window's maximum.
Tensor distinct(std::vector<int> shape, Rng& rng) {
  Tensor t(std::move(shape));
  std::vector<int> perm(t.numel());
  std::iota(perm.begin(), perm.end(), 0);
  for (size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
  for (size_t i = 0; i < t.numel(); ++i) t[i] = 0.25f * static_cast<float>(perm[i]) - 2.0f;
  return t;
}

void pool_case(std::vector<GradCase>& out, Rng& rng, const std::string& tag, int k, int s, int p,
               bool ceil) {
  const Tensor x = distinct({1, 1, 4, 4}, rng);
  const auto fwd = maxpool2d(x, k, s, p, ceil);
  const Tensor r = randn(fwd.output.shape(), rng);
  const Tensor gx = maxpool2d_backward(x.shape(), fwd, r);
  const auto rd = r.cast<double>();
  push(out, "maxpool2d" + tag, gx.data(),
       [&](const BasicTensor<double>& v) { return weighted(maxpool2d(v, k, s, p, ceil).output, rd); },
       x.cast<double>());
}

LabelMap mixed_map() {
  LabelMap m(2);
  m.set({0, 0}, Label::Positive);
  m.set({1, 0}, Label::Negative);
  m.set({1, 1}, Label::Positive);
  return m;  // (0, 1) stays Ignore
}

}  // namespace

std::vector<GradCase> gradient_suite(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradCase> out;

  conv_cases(out, rng, " 2x2 s1 p1", {1, 1, 4, 4}, {4, 1, 2, 2}, 1, 1);
  conv_cases(out, rng, " 2x2 s2 p1", {1, 1, 3, 4}, {4, 1, 2, 2}, 2, 1);
  conv_cases(out, rng, " 1x1", {2, 2, 2, 2}, {4, 2, 1, 1}, 1, 0);

  pool_case(out, rng, " k2 s2", 2, 2, 0, false);
  pool_case(out, rng, " k3 s2 p1 ceil", 3, 2, 1, true);

  {
    Tensor x = randn({1, 1, 4, 4}, rng);
    for (auto& v : x.data()) v += v >= 0 ? 0.1f : -0.1f;
    const Tensor y = relu(x);
    const Tensor r = randn(y.shape(), rng);
    const auto rd = r.cast<double>();
    push(out, "relu", relu_backward(y, r).data(),
         [&](const BasicTensor<double>& v) { return weighted(relu(v), rd); }, x.cast<double>());
  }

  {
    const LabelMap m = mixed_map();
    const Tensor logits = randn({1, 2, 2, 2}, rng, 2.0);
    Tensor g;
    softmax2_ce(logits, std::span<const LabelMap>(&m, 1), &g);
    push(out, "softmax2_ce shared map", g.data(),
         [&](const BasicTensor<double>& v) { return softmax2_ce(v, std::span<const LabelMap>(&m, 1)); },
         logits.cast<double>());

    const std::vector<LabelMap> per_item = {m, label_map(SampleClass::Negative, {{0, 1}, {1, 0}}, AnchorGridConfig{20, 2, 4, 10})};
    const Tensor l2 = randn({2, 2, 2, 2}, rng, 2.0);
    Tensor g2;
    softmax2_ce(l2, std::span<const LabelMap>(per_item), &g2);
    push(out, "softmax2_ce per-item maps", g2.data(),
         [&](const BasicTensor<double>& v) { return softmax2_ce(v, std::span<const LabelMap>(per_item)); },
         l2.cast<double>());
  }

  {
    const float d[8] = {-2.3f, -1.4f, -0.6f, -0.2f, 0.3f, 0.7f, 1.5f, 2.1f};
    const Tensor target = randn({1, 1, 2, 4}, rng);
    Tensor pred = target;
    for (int i = 0; i < 8; ++i) pred[static_cast<size_t>(i)] += d[i];
    Tensor g;
    smooth_l1(pred, target, &g);
    const auto td = target.cast<double>();
    push(out, "smooth_l1", g.data(),
         [&](const BasicTensor<double>& v) { return smooth_l1(v, td); }, pred.cast<double>());
  }

  {
    const LabelMap m = mixed_map();
    BoxDeltaMap targets(2);
    ScoreMaps maps;
    maps.a_logits = randn({1, 2, 2, 2}, rng, 2.0);
    Tensor reg = randn({1, 4, 2, 2}, rng, 0.5);
    for (int cell : {0, 3}) {
      BoxDelta t{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
      double* tp[4] = {&t.tx, &t.ty, &t.tw, &t.th};
      for (int k = 0; k < 4; ++k) {
        // Keep every residual clear of the |d| = 1 kink.
        const float dlt = reg[static_cast<size_t>(k * 4 + cell)] - static_cast<float>(*tp[k]);
        if (std::abs(std::abs(dlt) - 1.0f) < 0.05f) reg[static_cast<size_t>(k * 4 + cell)] += 0.2f;
      }
      targets.cells[static_cast<size_t>(cell)] = t;
    }
    maps.reg = reg;
    const RpnConfig cfg{10.0, 0.7};
    const auto res = rpn_loss(maps, std::span<const LabelMap>(&m, 1), std::span<const BoxDeltaMap>(&targets, 1), cfg);
    BasicScoreMaps<double> md;
    md.a_logits = maps.a_logits.cast<double>();
    md.reg = reg.cast<double>();
    auto L = [&](BasicScoreMaps<double> mm) {
      return rpn_loss(mm, std::span<const LabelMap>(&m, 1), std::span<const BoxDeltaMap>(&targets, 1), cfg).value;
    };
    push(out, "rpn_loss a_logits", res.grad.a_logits.data(),
         [&](const BasicTensor<double>& v) { auto mm = md; mm.a_logits = v; return L(mm); }, md.a_logits);
    push(out, "rpn_loss reg", res.grad.reg->data(),
         [&](const BasicTensor<double>& v) { auto mm = md; mm.reg = v; return L(mm); }, *md.reg);
  }

  {
    const AnchorGridConfig g2{20, 2, 4, 10};
    const std::vector<GridPos> diag = {{0, 0}, {1, 1}};
    const std::vector<LabelMap> la = {label_map(SampleClass::Positive, diag, g2),
                                      label_map(SampleClass::Negative, diag, g2)};
    const auto all = match_anchors(canonical_target(g2), g2, MatchScheme::all_positions());
    const std::vector<LabelMap> lq = {label_map(SampleClass::Positive, all, g2),
                                      label_map(SampleClass::Negative, all, g2)};
    ScoreMaps maps;
    maps.a_logits = randn({2, 2, 2, 2}, rng, 2.0);
    maps.q_logits = randn({2, 2, 2, 2}, rng, 2.0);
    const Rpn2tConfig cfg;
    const auto res = rpn2t_loss(maps, std::span<const LabelMap>(la), std::span<const LabelMap>(lq), cfg);
    BasicScoreMaps<double> md;
    md.a_logits = maps.a_logits.cast<double>();
    md.q_logits = maps.q_logits.cast<double>();
    auto L = [&](const BasicScoreMaps<double>& mm) {
      return rpn2t_loss(mm, std::span<const LabelMap>(la), std::span<const LabelMap>(lq), cfg).value;
    };
    push(out, "rpn2t_loss a_logits", res.grad.a_logits.data(),
         [&](const BasicTensor<double>& v) { auto mm = md; mm.a_logits = v; return L(mm); }, md.a_logits);
    push(out, "rpn2t_loss q_logits", res.grad.q_logits.data(),
         [&](const BasicTensor<double>& v) { auto mm = md; mm.q_logits = v; return L(mm); }, md.q_logits);

    // Head: 3x3 conv -> relu -> sibling 1x1 convs, trained through rpn2t_loss.
    Rng hr(seed + 1);
    HeadNet head(1, 1, hr);
    const Tensor feats = randn({2, 1, 2, 2}, rng);
    HeadNet::Cache cache;
    head.zero_grad();
    const auto hm = head.forward(feats, &cache);
    const auto hl = rpn2t_loss(hm, std::span<const LabelMap>(la), std::span<const LabelMap>(lq), cfg);
    head.backward(cache, hl.grad);
    const auto& W = head.weights();
    const auto fd = feats.cast<double>();
    auto head_loss = [&](const BasicTensor<double>& conv_w) {
      const auto h = relu(conv2d(fd, conv_w, W.get("conv_a.bias").cast<double>(), 1, 1));
      BasicScoreMaps<double> mm;
      mm.a_logits = conv2d(h, W.get("branch_a.weight").cast<double>(), W.get("branch_a.bias").cast<double>(), 1, 0);
      mm.q_logits = conv2d(h, W.get("branch_q.weight").cast<double>(), W.get("branch_q.bias").cast<double>(), 1, 0);
      return L(mm);
    };
    push(out, "head conv_a weights", W.get("conv_a.weight").grad(), head_loss,
         W.get("conv_a.weight").cast<double>());
  }

  {
    // conv -> relu -> maxpool -> conv through Network::backward.
    NetworkSpec spec;
    spec.input_size = 4;
    spec.input_channels = 1;
    spec.layers = {{"c1", LayerKind::Conv, 2, 1, 1, 2, false},
                   {"r1", LayerKind::Relu, 1, 1, 0, 0, false},
                   {"p1", LayerKind::MaxPool, 2, 2, 0, 0, false},
                   {"c2", LayerKind::Conv, 1, 1, 0, 2, false}};
    Rng nr(seed + 2);
    Network net = Network::random(spec, nr);
    const Tensor x = randn({1, 1, 4, 4}, rng);
    Network::Trace trace;
    const Tensor y = net.forward(x, trace);
    const Tensor r = randn(y.shape(), rng);
    net.zero_grad();
    net.backward(trace, r);
    const auto xd = x.cast<double>(), rd = r.cast<double>();
    const auto& W = net.weights();
    auto chain = [&](const BasicTensor<double>& w1, const BasicTensor<double>& w2) {
      auto h = relu(conv2d(xd, w1, W.get("c1.bias").cast<double>(), 1, 1));
      auto p = maxpool2d(h, 2, 2, 0, false).output;
      return weighted(conv2d(p, w2, W.get("c2.bias").cast<double>(), 1, 0), rd);
    };
    const auto w1 = W.get("c1.weight").cast<double>(), w2 = W.get("c2.weight").cast<double>();
    push(out, "network c1 weights", W.get("c1.weight").grad(),
         [&](const BasicTensor<double>& v) { return chain(v, w2); }, w1);
    push(out, "network c2 weights", W.get("c2.weight").grad(),
         [&](const BasicTensor<double>& v) { return chain(w1, v); }, w2);
  }
  return out;
}

}  // namespace rpn2t::testing
