#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rpn2t/frame_tracker.hpp"
#include "rpn2t/geometry.hpp"
#include "rpn2t/image.hpp"

namespace rpn2t {

// --- OTB-style curves -------------------------------------------------------

struct Curve {
  std::vector<double> thresholds;
  std::vector<double> values;
};
using PrecisionCurve = Curve;
using SuccessCurve = Curve;

std::vector<double> center_errors(const std::vector<Rect>& boxes, const std::vector<Rect>& gt);
std::vector<double> overlaps(const std::vector<Rect>& boxes, const std::vector<Rect>& gt);

// Fraction of frames with centre error <= t for t = 0, 1, ..., 50.
PrecisionCurve precision_curve(const std::vector<Rect>& boxes, const std::vector<Rect>& gt);
// Value at the given pixel threshold (must be one of the curve's thresholds).
double precision_at(const PrecisionCurve& curve, double threshold = 20.0);

// Fraction of frames with IoU > u for u = 0, 0.01, ..., 1.
SuccessCurve success_curve(const std::vector<Rect>& boxes, const std::vector<Rect>& gt);
double auc(const SuccessCurve& curve);

// Throws NumericError when a precision curve decreases or a success curve
// increases anywhere.
void check_monotone(const PrecisionCurve& precision, const SuccessCurve& success);

struct OtbMetrics {
  PrecisionCurve precision;
  SuccessCurve success;
  double precision20 = 0.0;
  double auc = 0.0;
  double mean_iou = 0.0;
};
OtbMetrics otb_metrics(const std::vector<Rect>& boxes, const std::vector<Rect>& gt);

// "threshold,value" lines with a header row.
std::string curve_csv(const Curve& curve, const std::string& value_name);

// --- VOT-style protocol -----------------------------------------------------

enum FrameFlag : std::uint8_t {
  kTracked = 1,
  kFailed = 2,
  kReinit = 4,   // re-initialised from groundtruth after a failure
  kBurnin = 8,   // excluded from accuracy
  kSkipped = 16, // between a failure and the following re-initialisation
  kInit = 32,    // very first frame
};
std::string flag_string(std::uint8_t flags);
std::uint8_t parse_flags(const std::string& text);

struct Trajectory {
  std::vector<Rect> boxes;
  std::vector<std::uint8_t> flags;
};

struct VotProtocol {
  int reset_delay = 5;
  int burnin = 10;  // frames from a (re)initialisation, that frame included
  int eao_lo = 20;
  int eao_hi = 80;

  void validate() const;
};

struct VotRun {
  Trajectory trajectory;
  std::vector<double> overlaps;  // per-frame IoU with groundtruth
  int failures = 0;
};

/// Runs the tracker with re-initialisation. A frame whose IoU is exactly 0 is
/// a failure; the tracker restarts from groundtruth reset_delay frames later.
VotRun vot_run(FrameTracker& tracker, const std::vector<Image>& frames,
               const std::vector<Rect>& gt, const VotProtocol& protocol);

// Builds a VotRun from a finished trajectory (flags given), for re-scoring.
VotRun vot_rescore(const Trajectory& traj, const std::vector<Rect>& gt);

// Mean IoU over tracked non-burn-in frames; NaN when there are none.
double vot_accuracy(const VotRun& run);

/// Overlap sequence starting at one (re)initialisation. A failed segment ends
/// with its zero-overlap failure frame.
struct EaoSegment {
  std::vector<double> overlaps;
  bool failed = false;
};
std::vector<EaoSegment> eao_segments(const VotRun& run);

// Mean over N in [lo, hi] of the mean-over-segments average overlap of the
// first N frames. Failed segments are zero-padded; unfailed segments shorter
// than N are left out of that N; lengths with no segment left are skipped.
// Returns 0 when no length is usable.
double expected_average_overlap(const std::vector<EaoSegment>& segments, int lo, int hi);

struct VotScores {
  double accuracy = 0.0;
  double robustness = 0.0;
  double eao = 0.0;
};

// runs[s][r] is repeat r on sequence s.
VotScores vot_scores(const std::vector<std::vector<VotRun>>& runs, const VotProtocol& protocol);

// --- Comparison table -------------------------------------------------------

struct TableRow {
  std::string tracker;
  double eao = 0.0;
  double accuracy = 0.0;
  double robustness = 0.0;
};

std::string render_table(const std::vector<TableRow>& rows);
std::vector<TableRow> parse_table(const std::string& text);

}  // namespace rpn2t
