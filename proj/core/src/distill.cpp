#include "rpn2t/distill.hpp"

#include <cmath>
#include <numeric>

#include "rpn2t/error.hpp"

namespace rpn2t {

namespace {

struct PreparedPair {
  Tensor student_input;  // [1, C, S, S]
  Tensor target;         // [1, C5, G, G]
};

Image fit(const Image& img, int size) {
  if (img.width == size && img.height == size) return img;
  return resize_bilinear(img, size, size);
}

std::vector<PreparedPair> prepare(const Network& teacher, const Network& student,
                                  const std::vector<Image>& patches, const PixelNorm& norm) {
  const int t_in = teacher.spec().input_size;
  const int s_in = student.spec().input_size;
  std::vector<PreparedPair> out;
  out.reserve(patches.size());
  for (const auto& p : patches) {
    const Image t_img = fit(p, t_in);
    PreparedPair pair{to_tensor(fit(t_img, s_in), norm), teacher.forward(to_tensor(t_img, norm))};
    out.push_back(std::move(pair));
  }
  return out;
}

double mse_and_grad(const Tensor& pred, const Tensor& target, Tensor* grad) {
  double total = 0.0;
  const float inv = 1.0f / static_cast<float>(pred.numel());
  for (size_t i = 0; i < pred.numel(); ++i) {
    const float d = pred[i] - target[i];
    total += static_cast<double>(d) * d;
    if (grad) (*grad)[i] = 2.0f * d * inv;
  }
  return total / static_cast<double>(pred.numel());
}

void check_compatible(const Network& teacher, const Network& student) {
  const int tg = output_size(teacher.spec(), teacher.spec().input_size);
  const int sg = output_size(student.spec(), student.spec().input_size);
  if (tg != sg || teacher.spec().output_channels() != student.spec().output_channels()) {
    throw DataError("teacher and student output maps differ (" + std::to_string(tg) + " vs " +
                    std::to_string(sg) + ")");
  }
}

double heldout_mse(const Network& student, const std::vector<PreparedPair>& set) {
  if (set.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : set) total += mse_and_grad(student.forward(p.student_input), p.target, nullptr);
  return total / static_cast<double>(set.size());
}

}  // namespace

double feature_mse(const Network& teacher, const Network& student,
                   const std::vector<Image>& patches, const PixelNorm& norm) {
  check_compatible(teacher, student);
  return heldout_mse(student, prepare(teacher, student, patches, norm));
}

DistillReport distill(const Network& teacher, Network student, const std::vector<Image>& patches,
                      const std::vector<Image>& heldout, const DistillConfig& cfg) {
  check_compatible(teacher, student);
  if (patches.empty()) throw DataError("distillation needs at least one patch");
  if (cfg.iterations < 0 || cfg.batch_size < 1) throw UsageError("invalid distillation schedule");

  const auto train = prepare(teacher, student, patches, cfg.norm);
  const auto held = prepare(teacher, student, heldout, cfg.norm);
  const int s_in = student.spec().input_size;
  const int channels = student.spec().input_channels;

  DistillReport report;
  report.heldout_initial = heldout_mse(student, held);

  Rng rng(cfg.seed);
  SgdOptimizer opt(SgdConfig{cfg.lr, cfg.momentum, cfg.weight_decay});
  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  size_t cursor = order.size();

  for (int it = 0; it < cfg.iterations; ++it) {
    const int b = std::min<int>(cfg.batch_size, static_cast<int>(train.size()));
    Tensor input({b, channels, s_in, s_in});
    const auto& tshape = train.front().target.shape();
    Tensor target({b, tshape[1], tshape[2], tshape[3]});
    for (int k = 0; k < b; ++k) {
      if (cursor == order.size()) {
        for (size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
        }
        cursor = 0;
      }
      const auto& pair = train[static_cast<size_t>(order[cursor++])];
      input.assign_slice(k, pair.student_input);
      target.assign_slice(k, pair.target);
    }
    Network::Trace trace;
    const Tensor pred = student.forward(input, trace);
    Tensor grad(pred.shape());
    const double loss = mse_and_grad(pred, target, &grad);
    if (!std::isfinite(loss)) throw NumericError("non-finite distillation loss");
    report.train_loss.push_back(loss);
    student.zero_grad();
    student.backward(trace, grad);
    const auto params = student.parameters();
    opt.step(params);
  }

  report.heldout_final = heldout_mse(student, held);
  report.student_weights = student.weights();
  return report;
}

}  // namespace rpn2t
