#pragma once

#include "rpn2t/geometry.hpp"
#include "rpn2t/image.hpp"

namespace rpn2t {

/// Per-frame protocol shared by the tracker and the evaluation drivers.
/// `initialize` may be called again at any point to restart from a new box.
class FrameTracker {
 public:
  virtual ~FrameTracker() = default;
  virtual void initialize(const Image& frame, const Rect& box) = 0;
  virtual Rect update(const Image& frame) = 0;
};

}  // namespace rpn2t
