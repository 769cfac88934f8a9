#pragma once

#include <cstdint>
#include <vector>

#include "rpn2t/image.hpp"
#include "rpn2t/netspec.hpp"

namespace rpn2t {

struct DistillConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;
  int iterations = 500;
  int batch_size = 8;
  std::uint64_t seed = 0;
  PixelNorm norm;
};

struct DistillReport {
  WeightSet student_weights;
  std::vector<double> train_loss;  // one entry per iteration
  double heldout_initial = 0.0;    // held-out MSE before the first update
  double heldout_final = 0.0;
};

/// Feature-mimic training. Each patch is fed to the teacher at the teacher's
/// input size and, resized, to the student at the student's input size; the
/// student is trained to reproduce the teacher's final (post-relu) map under a
/// mean-squared error. Only images are consumed: there is no label input.
///
/// Throws DataError when the two networks' output maps differ in shape and
/// NumericError on a non-finite loss.
DistillReport distill(const Network& teacher, Network student,
                      const std::vector<Image>& patches,
                      const std::vector<Image>& heldout, const DistillConfig& cfg);

// Mean squared error between teacher and student maps over `patches`.
double feature_mse(const Network& teacher, const Network& student,
                   const std::vector<Image>& patches, const PixelNorm& norm);

}  // namespace rpn2t
