#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rpn2t/tensor.hpp"

namespace rpn2t {

/// Ordered collection of named tensors, the unit of the weights file.
///
/// File layout (all integers little-endian):
///   "RPNT" | version u32 | count u32 |
///   count x { name_len u16 | name utf-8 | rank u8 | dims u32[rank] | f32[numel] }
class WeightSet {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void set(const std::string& name, Tensor t);
  bool contains(const std::string& name) const;
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);

  size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }

  std::vector<std::uint8_t> encode() const;
  static WeightSet decode(const std::vector<std::uint8_t>& bytes);

  void save(const std::filesystem::path& path) const;
  static WeightSet load(const std::filesystem::path& path);

  friend bool operator==(const WeightSet&, const WeightSet&) = default;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

}  // namespace rpn2t
