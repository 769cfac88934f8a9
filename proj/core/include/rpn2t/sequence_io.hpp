#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rpn2t/geometry.hpp"
#include "rpn2t/image.hpp"

namespace rpn2t {

/// On-disk layout: `frames/%06d.png` plus `groundtruth_rect.txt` holding one
/// `x,y,w,h` line per frame (0-based, top-left origin).
struct Sequence {
  std::string name;
  std::vector<Image> frames;
  std::vector<Rect> groundtruth;
};

// Commas, tabs or spaces separate the four numbers. With `one_based` the
// coordinates are shifted by -1 on load.
std::vector<Rect> parse_groundtruth(const std::string& text, bool one_based = false);
std::string format_groundtruth(const std::vector<Rect>& boxes);

// Frames are the *.png files of frames/ in lexicographic order.
Sequence load_sequence(const std::filesystem::path& dir, bool one_based = false);
void save_sequence(const Sequence& seq, const std::filesystem::path& dir);

/// Per-run output file.
struct Results {
  std::vector<std::pair<std::string, std::string>> config;
  std::uint64_t seed = 0;
  std::string sequence;
  std::vector<Rect> boxes;
  std::vector<double> scores;
  std::vector<std::string> flags;
  std::vector<std::pair<std::string, double>> metrics;

  std::string to_json() const;
  static Results from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static Results load(const std::filesystem::path& path);
};

}  // namespace rpn2t
