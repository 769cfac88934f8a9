#include "rpn2t/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "rpn2t/error.hpp"

namespace rpn2t {

namespace {

void check_lengths(const std::vector<Rect>& boxes, const std::vector<Rect>& gt) {
  if (boxes.size() != gt.size()) {
    throw DataError("trajectory has " + std::to_string(boxes.size()) + " boxes, groundtruth has " +
                    std::to_string(gt.size()));
  }
  if (gt.empty()) throw DataError("empty trajectory");
}

}  // namespace

std::vector<double> center_errors(const std::vector<Rect>& boxes, const std::vector<Rect>& gt) {
  check_lengths(boxes, gt);
  std::vector<double> out(boxes.size());
  for (size_t i = 0; i < boxes.size(); ++i) out[i] = center_distance(boxes[i], gt[i]);
  return out;
}

std::vector<double> overlaps(const std::vector<Rect>& boxes, const std::vector<Rect>& gt) {
  check_lengths(boxes, gt);
  std::vector<double> out(boxes.size());
  for (size_t i = 0; i < boxes.size(); ++i) out[i] = iou(boxes[i], gt[i]);
  return out;
}

PrecisionCurve precision_curve(const std::vector<Rect>& boxes, const std::vector<Rect>& gt) {
  const auto err = center_errors(boxes, gt);
  PrecisionCurve c;
  for (int t = 0; t <= 50; ++t) {
    const auto hit = std::count_if(err.begin(), err.end(), [t](double e) { return e <= t; });
    c.thresholds.push_back(t);
    c.values.push_back(static_cast<double>(hit) / static_cast<double>(err.size()));
  }
  return c;
}

double precision_at(const PrecisionCurve& curve, double threshold) {
  for (size_t i = 0; i < curve.thresholds.size(); ++i) {
    if (curve.thresholds[i] == threshold) return curve.values[i];
  }
  throw UsageError("threshold not on the precision curve");
}

SuccessCurve success_curve(const std::vector<Rect>& boxes, const std::vector<Rect>& gt) {
  const auto ov = overlaps(boxes, gt);
  SuccessCurve c;
  for (int k = 0; k <= 100; ++k) {
    const double u = k / 100.0;
    const auto hit = std::count_if(ov.begin(), ov.end(), [u](double o) { return o > u; });
    c.thresholds.push_back(u);
    c.values.push_back(static_cast<double>(hit) / static_cast<double>(ov.size()));
  }
  return c;
}

double auc(const SuccessCurve& curve) {
  if (curve.values.empty()) throw UsageError("empty curve");
  double s = 0.0;
  for (double v : curve.values) s += v;
  return s / static_cast<double>(curve.values.size());
}

void check_monotone(const PrecisionCurve& precision, const SuccessCurve& success) {
  for (size_t i = 1; i < precision.values.size(); ++i) {
    if (precision.values[i] < precision.values[i - 1]) throw NumericError("precision curve decreases");
  }
  for (size_t i = 1; i < success.values.size(); ++i) {
    if (success.values[i] > success.values[i - 1]) throw NumericError("success curve increases");
  }
}

OtbMetrics otb_metrics(const std::vector<Rect>& boxes, const std::vector<Rect>& gt) {
  OtbMetrics m;
  m.precision = precision_curve(boxes, gt);
  m.success = success_curve(boxes, gt);
  check_monotone(m.precision, m.success);
  m.precision20 = precision_at(m.precision, 20.0);
  m.auc = auc(m.success);
  const auto ov = overlaps(boxes, gt);
  double s = 0.0;
  for (double o : ov) s += o;
  m.mean_iou = s / static_cast<double>(ov.size());
  return m;
}

std::string curve_csv(const Curve& curve, const std::string& value_name) {
  std::ostringstream os;
  os.precision(17);
  os << "threshold," << value_name << "\n";
  for (size_t i = 0; i < curve.values.size(); ++i) {
    os << curve.thresholds[i] << "," << curve.values[i] << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::pair<FrameFlag, const char*> kFlagNames[] = {
    {kInit, "init"},   {kTracked, "tracked"}, {kFailed, "failed"},
    {kReinit, "reinit"}, {kSkipped, "skipped"}, {kBurnin, "burnin"},
};

}  // namespace

std::string flag_string(std::uint8_t flags) {
  std::string out;
  for (const auto& [bit, name] : kFlagNames) {
    if (flags & bit) {
      if (!out.empty()) out += '|';
      out += name;
    }
  }
  return out;
}

std::uint8_t parse_flags(const std::string& text) {
  std::uint8_t out = 0;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, '|')) {
    if (tok.empty()) continue;
    bool found = false;
    for (const auto& [bit, name] : kFlagNames) {
      if (tok == name) {
        out |= bit;
        found = true;
      }
    }
    if (!found) throw DataError("unknown frame flag '" + tok + "'");
  }
  return out;
}

void VotProtocol::validate() const {
  if (reset_delay < 1) throw UsageError("reset_delay must be at least 1");
  if (burnin < 0) throw UsageError("burnin must be non-negative");
  if (eao_lo < 1 || eao_hi < eao_lo) throw UsageError("invalid EAO interval");
}

VotRun vot_run(FrameTracker& tracker, const std::vector<Image>& frames,
               const std::vector<Rect>& gt, const VotProtocol& protocol) {
  protocol.validate();
  if (frames.size() != gt.size()) throw DataError("frame and groundtruth counts differ");
  if (frames.empty()) throw DataError("empty sequence");
  const int n = static_cast<int>(frames.size());
  VotRun run;
  run.trajectory.boxes.resize(frames.size());
  run.trajectory.flags.assign(frames.size(), 0);
  run.overlaps.assign(frames.size(), 0.0);
  auto& boxes = run.trajectory.boxes;
  auto& flags = run.trajectory.flags;

  int f = 0;
  bool first = true;
  while (f < n) {
    tracker.initialize(frames[f], gt[f]);
    const int start = f;
    boxes[f] = gt[f];
    run.overlaps[f] = iou(gt[f], gt[f]);
    flags[f] = (first ? kInit : kReinit) | (protocol.burnin > 0 ? kBurnin : 0);
    first = false;
    for (++f; f < n; ++f) {
      const Rect r = tracker.update(frames[f]);
      boxes[f] = r;
      const double o = iou(r, gt[f]);
      run.overlaps[f] = o;
      if (o == 0.0) {
        flags[f] = kFailed;
        ++run.failures;
        const int next = f + protocol.reset_delay;
        for (int k = f + 1; k < std::min(next, n); ++k) {
          boxes[k] = r;
          flags[k] = kSkipped;
        }
        f = next;
        break;
      }
      flags[f] = kTracked | (f - start < protocol.burnin ? kBurnin : 0);
    }
  }
  return run;
}

VotRun vot_rescore(const Trajectory& traj, const std::vector<Rect>& gt) {
  if (traj.flags.size() != traj.boxes.size()) throw DataError("flag and box counts differ");
  VotRun run;
  run.trajectory = traj;
  run.overlaps = overlaps(traj.boxes, gt);
  for (size_t i = 0; i < traj.flags.size(); ++i) {
    if (traj.flags[i] & kFailed) ++run.failures;
    if (traj.flags[i] & (kSkipped | kFailed)) run.overlaps[i] = 0.0;
  }
  return run;
}

double vot_accuracy(const VotRun& run) {
  double s = 0.0;
  int n = 0;
  for (size_t i = 0; i < run.overlaps.size(); ++i) {
    const auto fl = run.trajectory.flags[i];
    if ((fl & kTracked) && !(fl & kBurnin)) {
      s += run.overlaps[i];
      ++n;
    }
  }
  return n > 0 ? s / n : std::numeric_limits<double>::quiet_NaN();
}

std::vector<EaoSegment> eao_segments(const VotRun& run) {
  std::vector<EaoSegment> out;
  bool open = false;
  for (size_t i = 0; i < run.overlaps.size(); ++i) {
    const auto fl = run.trajectory.flags[i];
    if (fl & (kInit | kReinit)) {
      out.push_back({});
      open = true;
    }
    if (!open) continue;
    out.back().overlaps.push_back(run.overlaps[i]);
    if (fl & kFailed) {
      out.back().overlaps.back() = 0.0;
      out.back().failed = true;
      open = false;
    }
  }
  return out;
}

double expected_average_overlap(const std::vector<EaoSegment>& segments, int lo, int hi) {
  if (lo < 1 || hi < lo) throw UsageError("invalid EAO interval");
  double total = 0.0;
  int used = 0;
  for (int N = lo; N <= hi; ++N) {
    double phi = 0.0;
    int count = 0;
    for (const auto& seg : segments) {
      const int len = static_cast<int>(seg.overlaps.size());
      if (!seg.failed && len < N) continue;
      double s = 0.0;
      for (int k = 0; k < std::min(len, N); ++k) s += seg.overlaps[static_cast<size_t>(k)];
      phi += s / N;
      ++count;
    }
    if (count == 0) continue;
    total += phi / count;
    ++used;
  }
  return used > 0 ? total / used : 0.0;
}

VotScores vot_scores(const std::vector<std::vector<VotRun>>& runs, const VotProtocol& protocol) {
  protocol.validate();
  if (runs.empty()) throw UsageError("no sequences to score");
  VotScores out;
  double acc_sum = 0.0;
  int acc_n = 0;
  double rob_sum = 0.0;
  std::vector<EaoSegment> segments;
  for (const auto& seq : runs) {
    if (seq.empty()) throw UsageError("sequence without runs");
    double a = 0.0;
    int an = 0;
    double fails = 0.0;
    for (const auto& r : seq) {
      const double acc = vot_accuracy(r);
      if (!std::isnan(acc)) {
        a += acc;
        ++an;
      }
      fails += r.failures;
      auto segs = eao_segments(r);
      segments.insert(segments.end(), segs.begin(), segs.end());
    }
    if (an > 0) {
      acc_sum += a / an;
      ++acc_n;
    }
    rob_sum += fails / static_cast<double>(seq.size());
  }
  out.accuracy = acc_n > 0 ? acc_sum / acc_n : 0.0;
  out.robustness = rob_sum / static_cast<double>(runs.size());
  out.eao = expected_average_overlap(segments, protocol.eao_lo, protocol.eao_hi);
  return out;
}

// ---------------------------------------------------------------------------

std::string render_table(const std::vector<TableRow>& rows) {
  size_t width = 7;
  for (const auto& r : rows) width = std::max(width, r.tracker.size());
  width += 2;
  std::string out;
  char buf[128];
  auto pad = [&](const std::string& s) { return s + std::string(width - s.size(), ' '); };
  out += pad("Tracker") + "  EAO    ACC    ROB\n";
  out += std::string(width + 19, '-') + "\n";
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.3f  %.2f   %.2f\n", r.eao, r.accuracy, r.robustness);
    out += pad(r.tracker) + buf;
  }
  return out;
}

std::vector<TableRow> parse_table(const std::string& text) {
  std::vector<TableRow> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty() || tok[0] == "Tracker" || tok[0].find_first_not_of('-') == std::string::npos) {
      continue;
    }
    if (tok.size() < 4) throw DataError("malformed table row: " + line);
    TableRow r;
    for (size_t i = 0; i + 3 < tok.size(); ++i) r.tracker += (i ? " " : "") + tok[i];
    try {
      r.eao = std::stod(tok[tok.size() - 3]);
      r.accuracy = std::stod(tok[tok.size() - 2]);
      r.robustness = std::stod(tok[tok.size() - 1]);
    } catch (const std::exception&) {
      throw DataError("malformed table row: " + line);
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace rpn2t
