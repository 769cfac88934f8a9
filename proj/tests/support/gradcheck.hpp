#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rpn2t/tensor.hpp"

namespace rpn2t::testing {

// ||a - n|| / max(||a||, ||n||); 0 when both vanish.
double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric);

// Central differences of `f` at `x` in double precision.
std::vector<double> numeric_gradient(const std::function<double(const BasicTensor<double>&)>& f,
                                     const BasicTensor<double>& x, double eps = 1e-3);

std::vector<double> to_double(std::span<const float> v);

struct GradCase {
  std::string name;
  double rel_error = 0.0;
  int elements = 0;  // size of the checked tensor
};

// Float analytic gradients of every differentiable op and both losses against
// double-precision central differences on small random tensors.
std::vector<GradCase> gradient_suite(std::uint64_t seed);

}  // namespace rpn2t::testing
