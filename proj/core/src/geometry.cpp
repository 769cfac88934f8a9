#include "rpn2t/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rpn2t/error.hpp"

namespace rpn2t {

bool Rect::valid() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) &&
         std::isfinite(h) && w > 0.0 && h > 0.0;
}

void validate(const Rect& r) {
  if (!r.valid()) {
    std::ostringstream os;
    os << "invalid rect (" << r.x << ", " << r.y << ", " << r.w << ", " << r.h
       << ")";
    throw UsageError(os.str());
  }
}

double iou(const Rect& a, const Rect& b) {
  const double ix = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double iy = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double center_distance(const Rect& a, const Rect& b) {
  return std::hypot(a.cx() - b.cx(), a.cy() - b.cy());
}

void AnchorGridConfig::validate() const {
  if (patch_size <= 0 || grid_size < 2 || stride < 1 || anchor_side <= 0 ||
      anchor_side > patch_size) {
    throw UsageError("invalid anchor grid config");
  }
}

Point anchor_center(const AnchorGridConfig& cfg, GridPos cell) {
  const double mid = 0.5 * (cfg.grid_size - 1);
  const double c = 0.5 * cfg.patch_size;
  return Point{c + (cell.x - mid) * cfg.stride, c + (cell.y - mid) * cfg.stride};
}

std::vector<Point> anchor_centers(const AnchorGridConfig& cfg) {
  if (cfg.grid_size < 1 || cfg.stride < 1) {
    throw UsageError("invalid anchor grid config");
  }
  std::vector<Point> out;
  out.reserve(static_cast<size_t>(cfg.cells()));
  for (int y = 0; y < cfg.grid_size; ++y) {
    for (int x = 0; x < cfg.grid_size; ++x) {
      out.push_back(anchor_center(cfg, {x, y}));
    }
  }
  return out;
}

Rect anchor_box(const AnchorGridConfig& cfg, GridPos cell) {
  const Point c = anchor_center(cfg, cell);
  return Rect::from_center(c.x, c.y, cfg.anchor_side, cfg.anchor_side);
}

std::vector<GridPos> central_block(const AnchorGridConfig& cfg) {
  const int g = cfg.grid_size;
  if (g % 2 == 1) return {{g / 2, g / 2}};
  const int lo = g / 2 - 1;
  return {{lo, lo}, {lo + 1, lo}, {lo, lo + 1}, {lo + 1, lo + 1}};
}

MatchScheme MatchScheme::anchor_matched(double tau) {
  MatchScheme s{Kind::AnchorMatched, tau};
  s.validate();
  return s;
}

MatchScheme MatchScheme::all_positions() { return MatchScheme{Kind::AllPositions, 0.0}; }

void MatchScheme::validate() const {
  if (kind == Kind::AnchorMatched && !(tau > 0.0 && tau <= 1.0)) {
    throw UsageError("anchor-matched IoU threshold must lie in (0, 1]");
  }
}

std::string MatchScheme::to_string() const {
  if (kind == Kind::AllPositions) return "all";
  std::ostringstream os;
  os << "anchor:" << tau;
  return os.str();
}

MatchScheme MatchScheme::parse(const std::string& text) {
  if (text == "all" || text == "all-positions") return all_positions();
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  if (head == "anchor" || head == "anchor-matched") {
    if (colon == std::string::npos) return anchor_matched(0.7);
    try {
      size_t used = 0;
      const std::string num = text.substr(colon + 1);
      const double tau = std::stod(num, &used);
      if (used != num.size()) throw std::invalid_argument(num);
      return anchor_matched(tau);
    } catch (const std::logic_error&) {
      throw UsageError("bad match scheme threshold in '" + text + "'");
    }
  }
  throw UsageError("unknown match scheme '" + text + "'");
}

std::vector<GridPos> match_anchors(const Rect& gt, const AnchorGridConfig& cfg,
                                   const MatchScheme& scheme) {
  cfg.validate();
  scheme.validate();
  validate(gt);
  constexpr double kSlack = 1e-9;
  if (gt.x < -kSlack || gt.y < -kSlack || gt.x + gt.w > cfg.patch_size + kSlack ||
      gt.y + gt.h > cfg.patch_size + kSlack) {
    throw DataError("groundtruth box extends beyond the patch");
  }

  std::vector<GridPos> out;
  if (scheme.kind == MatchScheme::Kind::AllPositions) {
    out.reserve(static_cast<size_t>(cfg.cells()));
    for (int y = 0; y < cfg.grid_size; ++y)
      for (int x = 0; x < cfg.grid_size; ++x) out.push_back({x, y});
    return out;
  }

  const auto central = central_block(cfg);
  for (int y = 0; y < cfg.grid_size; ++y) {
    for (int x = 0; x < cfg.grid_size; ++x) {
      const GridPos p{x, y};
      const bool fiat = std::find(central.begin(), central.end(), p) != central.end();
      const double overlap = fiat ? 1.0 : iou(anchor_box(cfg, p), gt);
      if (overlap >= scheme.tau) out.push_back(p);
    }
  }
  return out;
}

Rect canonical_target(const AnchorGridConfig& cfg) {
  const double c = 0.5 * cfg.patch_size;
  return Rect::from_center(c, c, cfg.anchor_side, cfg.anchor_side);
}

LabelMap::LabelMap(int grid_size, Label fill)
    : grid_size_(grid_size),
      cells_(static_cast<size_t>(grid_size) * static_cast<size_t>(grid_size), fill) {
  if (grid_size < 1) throw UsageError("label map grid size must be positive");
}

int LabelMap::index(GridPos p) const {
  if (p.x < 0 || p.y < 0 || p.x >= grid_size_ || p.y >= grid_size_) {
    throw UsageError("grid position outside the label map");
  }
  return p.y * grid_size_ + p.x;
}

int LabelMap::count(Label l) const {
  return static_cast<int>(std::count(cells_.begin(), cells_.end(), l));
}

std::string LabelMap::to_text() const {
  std::string out;
  out.reserve(static_cast<size_t>(cells() + grid_size_));
  for (int y = 0; y < grid_size_; ++y) {
    for (int x = 0; x < grid_size_; ++x) {
      switch (cells_[static_cast<size_t>(y * grid_size_ + x)]) {
        case Label::Positive: out += '+'; break;
        case Label::Negative: out += '-'; break;
        case Label::Ignore: out += '.'; break;
      }
    }
    out += '\n';
  }
  return out;
}

std::string LabelMap::to_csv() const {
  std::ostringstream os;
  for (int y = 0; y < grid_size_; ++y) {
    for (int x = 0; x < grid_size_; ++x) {
      if (x) os << ',';
      os << static_cast<int>(cells_[static_cast<size_t>(y * grid_size_ + x)]);
    }
    os << '\n';
  }
  return os.str();
}

LabelMap label_map(SampleClass cls, const std::vector<GridPos>& matched,
                   const AnchorGridConfig& cfg) {
  LabelMap map(cfg.grid_size);
  const Label l = cls == SampleClass::Positive ? Label::Positive : Label::Negative;
  for (const auto& p : matched) map.set(p, l);
  return map;
}

}  // namespace rpn2t
