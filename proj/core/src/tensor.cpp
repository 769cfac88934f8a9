#include "rpn2t/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rpn2t/error.hpp"

namespace rpn2t {

size_t shape_numel(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw UsageError("negative tensor dimension");
    n *= static_cast<size_t>(d);
  }
  return n;
}

std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
BasicTensor<T>::BasicTensor(std::vector<int> shape, T fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

template <typename T>
BasicTensor<T>::BasicTensor(std::vector<int> shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_numel(shape_)) {
    throw UsageError("tensor data length does not match shape " + shape_string(shape_));
  }
}

template <typename T>
std::span<T> BasicTensor<T>::grad() {
  if (grad_.size() != data_.size()) grad_.assign(data_.size(), T(0));
  return grad_;
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  grad_.assign(data_.size(), T(0));
}

template <typename T>
void BasicTensor<T>::reshape(std::vector<int> shape) {
  if (shape_numel(shape) != data_.size()) {
    throw UsageError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  shape_ = std::move(shape);
}

template <typename T>
void BasicTensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
bool BasicTensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
BasicTensor<T> BasicTensor<T>::slice(int first, int count) const {
  if (shape_.empty() || first < 0 || count < 0 || first + count > shape_[0]) {
    throw UsageError("tensor slice out of range");
  }
  const size_t item = shape_[0] ? data_.size() / static_cast<size_t>(shape_[0]) : 0;
  std::vector<int> s = shape_;
  s[0] = count;
  std::vector<T> d(data_.begin() + static_cast<std::ptrdiff_t>(item * first),
                   data_.begin() + static_cast<std::ptrdiff_t>(item * (first + count)));
  return BasicTensor(std::move(s), std::move(d));
}

template <typename T>
void BasicTensor<T>::assign_slice(int first, const BasicTensor& src) {
  if (shape_.empty() || src.rank() != rank() || first < 0 ||
      first + src.dim(0) > shape_[0] ||
      !std::equal(shape_.begin() + 1, shape_.end(), src.shape_.begin() + 1)) {
    throw UsageError("tensor slice assignment shape mismatch");
  }
  const size_t item = data_.size() / static_cast<size_t>(shape_[0]);
  std::copy(src.data_.begin(), src.data_.end(),
            data_.begin() + static_cast<std::ptrdiff_t>(item * first));
}

template class BasicTensor<float>;
template class BasicTensor<double>;

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

int Rng::uniform_int(int lo, int hi) {
  if (hi < lo) throw UsageError("empty integer range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t v = engine_();
  while (v >= limit) v = engine_();
  return lo + static_cast<int>(v % span);
}

// Marsaglia polar method.
double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  have_spare_ = true;
  return u * m;
}

}  // namespace rpn2t
