#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rpn2t {

/// Axis-aligned box in pixels, top-left origin.
struct Rect {
  double x = 0.0;
  double y = 0.0;
  double w = 1.0;
  double h = 1.0;

  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
  double area() const { return w * h; }
  bool valid() const;

  static Rect from_center(double cx, double cy, double w, double h) {
    return Rect{cx - 0.5 * w, cy - 0.5 * h, w, h};
  }

  friend bool operator==(const Rect&, const Rect&) = default;
};

// Throws UsageError unless w > 0, h > 0 and every field is finite.
void validate(const Rect& r);

/// Intersection over union; symmetric, 0 for disjoint boxes.
double iou(const Rect& a, const Rect& b);

double center_distance(const Rect& a, const Rect& b);

struct AnchorGridConfig {
  int patch_size = 203;
  int grid_size = 14;
  int stride = 16;
  int anchor_side = 171;

  void validate() const;
  int cells() const { return grid_size * grid_size; }
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Grid cell index. `x` selects the column (horizontal offset), `y` the row.
struct GridPos {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const GridPos&, const GridPos&) = default;
};

// Anchor center of cell (x, y); the grid is symmetric about the patch center.
Point anchor_center(const AnchorGridConfig& cfg, GridPos cell);

// All centers, row-major (index = y * grid_size + x). Accepts grid_size == 1.
std::vector<Point> anchor_centers(const AnchorGridConfig& cfg);

Rect anchor_box(const AnchorGridConfig& cfg, GridPos cell);

// The cells treated as having IoU 1.0 with a centered groundtruth: the central
// 2x2 block on even grids, the single central cell on odd grids.
std::vector<GridPos> central_block(const AnchorGridConfig& cfg);

struct MatchScheme {
  enum class Kind { AnchorMatched, AllPositions };

  Kind kind = Kind::AllPositions;
  double tau = 0.7;

  static MatchScheme anchor_matched(double tau);
  static MatchScheme all_positions();

  void validate() const;
  std::string to_string() const;
  // Accepts "all" / "all-positions" or "anchor:<tau>" / "anchor-matched:<tau>".
  static MatchScheme parse(const std::string& text);

  friend bool operator==(const MatchScheme&, const MatchScheme&) = default;
};

/// Matched cells, sorted row-major. Throws DataError if `gt` leaves the patch.
std::vector<GridPos> match_anchors(const Rect& gt, const AnchorGridConfig& cfg,
                                   const MatchScheme& scheme);

// Centered anchor-sized square; the groundtruth of every positive patch.
Rect canonical_target(const AnchorGridConfig& cfg);

enum class Label : std::int8_t { Negative = 0, Positive = 1, Ignore = -1 };

enum class SampleClass { Positive, Negative };

class LabelMap {
 public:
  LabelMap() = default;
  explicit LabelMap(int grid_size, Label fill = Label::Ignore);

  int grid_size() const { return grid_size_; }
  int cells() const { return grid_size_ * grid_size_; }

  Label at(GridPos p) const { return cells_[index(p)]; }
  Label at(int linear) const { return cells_[linear]; }
  void set(GridPos p, Label l) { cells_[index(p)] = l; }

  int count(Label l) const;
  bool all_ignore() const { return count(Label::Ignore) == cells(); }
  const std::vector<Label>& data() const { return cells_; }

  // One row per line, '+' Positive, '-' Negative, '.' Ignore.
  std::string to_text() const;
  // One row per line, 1 Positive, 0 Negative, -1 Ignore.
  std::string to_csv() const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  int index(GridPos p) const;

  int grid_size_ = 0;
  std::vector<Label> cells_;
};

LabelMap label_map(SampleClass cls, const std::vector<GridPos>& matched,
                   const AnchorGridConfig& cfg);

}  // namespace rpn2t
