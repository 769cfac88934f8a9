#include "rpn2t/weights.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "rpn2t/error.hpp"
#include "rpn2t/fileio.hpp"

namespace rpn2t {

namespace {

constexpr char kMagic[4] = {'R', 'P', 'N', 'T'};

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }

  std::string get_string(size_t n) {
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("weights file truncated");
  }

  const std::vector<std::uint8_t>& bytes_;
  size_t pos_ = 0;
};

}  // namespace

void WeightSet::set(const std::string& name, Tensor t) {
  if (name.empty() || name.size() > 0xFFFF) throw UsageError("invalid tensor name");
  if (t.rank() > 0xFF) throw UsageError("tensor rank too large for weights file");
  t.drop_grad();
  for (auto& [n, v] : entries_) {
    if (n == name) {
      v = std::move(t);
      return;
    }
  }
  entries_.emplace_back(name, std::move(t));
}

bool WeightSet::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == name; });
}

const Tensor& WeightSet::get(const std::string& name) const {
  for (const auto& [n, v] : entries_)
    if (n == name) return v;
  throw DataError("weights: no tensor named '" + name + "'");
}

Tensor& WeightSet::get(const std::string& name) {
  for (auto& [n, v] : entries_)
    if (n == name) return v;
  throw DataError("weights: no tensor named '" + name + "'");
}

std::vector<std::uint8_t> WeightSet::encode() const {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, t] : entries_) {
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<std::uint8_t>(t.rank()));
    for (int d : t.shape()) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (float f : t.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

WeightSet WeightSet::decode(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError("not a weights file (bad magic)");
  }
  Reader r(bytes);
  r.get_string(4);
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw DataError("unsupported weights file version");
  const auto count = r.get<std::uint32_t>();
  WeightSet ws;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint16_t>();
    std::string name = r.get_string(name_len);
    const auto rank = r.get<std::uint8_t>();
    std::vector<int> shape(rank);
    for (auto& d : shape) {
      const auto v = r.get<std::uint32_t>();
      if (v > 0x7FFFFFFF) throw DataError("weights: dimension too large");
      d = static_cast<int>(v);
    }
    std::vector<float> data(shape_numel(shape));
    for (auto& f : data) f = std::bit_cast<float>(r.get<std::uint32_t>());
    if (ws.contains(name)) throw DataError("weights: duplicate tensor '" + name + "'");
    ws.entries_.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  if (!r.done()) throw DataError("weights file has trailing bytes");
  return ws;
}

void WeightSet::save(const std::filesystem::path& path) const {
  const auto bytes = encode();
  write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

WeightSet WeightSet::load(const std::filesystem::path& path) {
  const std::string s = read_file(path);
  return decode(std::vector<std::uint8_t>(s.begin(), s.end()));
}

}  // namespace rpn2t
