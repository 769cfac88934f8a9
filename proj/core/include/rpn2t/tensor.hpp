#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace rpn2t {

/// Dense row-major array with an optional same-shape gradient buffer.
///
/// Production code uses `Tensor` (32-bit). The double instantiation exists so
/// gradient checks can evaluate finite differences without float round-off
/// swamping the signal.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(std::vector<int> shape, T fill = T(0));
  BasicTensor(std::vector<int> shape, std::vector<T> data);

  const std::vector<int>& shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  int dim(size_t i) const { return shape_.at(i); }
  size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T* ptr() { return data_.data(); }
  const T* ptr() const { return data_.data(); }
  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  // NCHW accessor; only valid on rank-4 tensors.
  T& at(int n, int c, int h, int w) { return data_[offset4(n, c, h, w)]; }
  const T& at(int n, int c, int h, int w) const { return data_[offset4(n, c, h, w)]; }

  bool has_grad() const { return !grad_.empty(); }
  // Allocates a zeroed gradient buffer on first use.
  std::span<T> grad();
  std::span<const T> grad() const { return grad_; }
  void zero_grad();
  void drop_grad() { grad_.clear(); grad_.shrink_to_fit(); }

  void reshape(std::vector<int> shape);
  void fill(T v);
  bool all_finite() const;

  // Copies `count` items of the leading dimension starting at `first`.
  BasicTensor slice(int first, int count) const;
  // Writes `src` (leading dim 1 or more) at item `first` of this tensor.
  void assign_slice(int first, const BasicTensor& src);

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> d(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(d));
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  size_t offset4(int n, int c, int h, int w) const {
    return ((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }

  std::vector<int> shape_;
  std::vector<T> data_;
  std::vector<T> grad_;
};

using Tensor = BasicTensor<float>;

size_t shape_numel(const std::vector<int>& shape);
std::string shape_string(const std::vector<int>& shape);

/// Seeded generator. The raw stream comes from std::mt19937_64, whose output
/// is fixed by the C++ standard; the distributions below are implemented here
/// rather than taken from <random> because the standard leaves those
/// implementation-defined.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64";

  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  // [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [lo, hi], unbiased.
  int uniform_int(int lo, int hi);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Independent child stream; advances this generator by one draw.
  Rng split() { return Rng(next_u64()); }

  template <typename T>
  void fill_normal(BasicTensor<T>& t, double stddev) {
    for (auto& v : t.data()) v = static_cast<T>(normal() * stddev);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rpn2t
