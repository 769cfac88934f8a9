// Acceptance checks, one line per criterion. `--only N` runs a single one.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "gradcheck.hpp"
#include "metric_fixtures.hpp"
#include "rpn2t/error.hpp"
#include "rpn2t/fileio.hpp"
#include "rpn2t/pipeline.hpp"

using namespace rpn2t;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradRelTol = 1e-4;
constexpr double kGradSeconds = 30.0;
constexpr int kGradMinElements = 4;
constexpr int kGradMaxElements = 16;
constexpr double kIouTol = 1e-6;
constexpr int kAnchorPlacements = 50;
constexpr double kDistillReduction = 0.90;
constexpr int kDistillIterations = 500;
constexpr int kDistillPatches = 64;
constexpr double kDistillSeconds = 120.0;
constexpr double kMetricTol = 1e-9;
constexpr int kMonotoneTrajectories = 1000;
constexpr double kEasyMeanIou = 0.5;
constexpr int kEasyCleanSequences = 8;
constexpr double kEasySeconds = 600.0;
constexpr std::uint64_t kSeed = 0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

Outcome gradient_suite_check() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int cases = 0;
  bool sizes_ok = true;
  std::string worst_name;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    for (const auto& c : testing::gradient_suite(seed)) {
      ++cases;
      sizes_ok = sizes_ok && c.elements >= kGradMinElements && c.elements <= kGradMaxElements;
      if (!(c.rel_error <= worst)) {
        worst = c.rel_error;
        worst_name = c.name;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < kGradRelTol && sizes_ok && secs < kGradSeconds,
          format("%d cases, max rel error %.2e (%s), sizes %s, %.1f s", cases, worst, worst_name.c_str(),
                 sizes_ok ? "4-16" : "OUT OF RANGE", secs)};
}

// Every cell's IoU from first principles, plus the always-matched central block.
std::set<GridPos> brute_force(const Rect& gt, const AnchorGridConfig& g, double tau) {
  std::set<GridPos> out;
  const double a = g.anchor_side;
  for (int y = 0; y < g.grid_size; ++y) {
    for (int x = 0; x < g.grid_size; ++x) {
      const double cx = g.patch_size / 2.0 + (x - (g.grid_size - 1) / 2.0) * g.stride;
      const double cy = g.patch_size / 2.0 + (y - (g.grid_size - 1) / 2.0) * g.stride;
      const double ix = std::max(0.0, std::min(cx + a / 2, gt.x + gt.w) - std::max(cx - a / 2, gt.x));
      const double iy = std::max(0.0, std::min(cy + a / 2, gt.y + gt.h) - std::max(cy - a / 2, gt.y));
      const double inter = ix * iy;
      if (inter / (a * a + gt.w * gt.h - inter) >= tau) out.insert({x, y});
    }
  }
  for (const auto& p : central_block(g)) out.insert(p);
  return out;
}

Outcome anchor_check() {
  const AnchorGridConfig g;
  Rng rng(kSeed + 2);
  int mismatches = 0, total = 0;
  for (double tau : {0.5, 0.6, 0.7, 0.8, 0.9}) {
    for (int i = 0; i < kAnchorPlacements; ++i) {
      const double w = rng.uniform(60.0, 203.0), h = rng.uniform(60.0, 203.0);
      const Rect gt{rng.uniform(0.0, 203.0 - w), rng.uniform(0.0, 203.0 - h), w, h};
      const auto fast = match_anchors(gt, g, MatchScheme::anchor_matched(tau));
      ++total;
      if (std::set<GridPos>(fast.begin(), fast.end()) != brute_force(gt, g, tau)) ++mismatches;
    }
  }
  const Rect target = canonical_target(g);
  const auto central = match_anchors(target, g, MatchScheme::anchor_matched(0.7));
  const bool central_ok = central == central_block(g) && central.size() == 4;
  const double near = iou(anchor_box(g, {7, 6}), target);   // offset (8, 8)
  const double far = iou(anchor_box(g, {8, 6}), target);    // offset (24, 8)
  const bool iou_ok = std::abs(near - 26569.0 / 31913.0) <= kIouTol &&
                      std::abs(far - 23961.0 / 34521.0) <= kIouTol;
  return {mismatches == 0 && central_ok && iou_ok,
          format("%d/%d placements differ, central 2x2 at 0.7 %s, IoU(8,8)=%.5f IoU(24,8)=%.5f", mismatches,
                 total, central_ok ? "exact" : "WRONG", near, far)};
}

Outcome sizing_check() {
  const NetworkSpec teacher = reference_teacher_spec();
  const RFInfo score = receptive_field(with_score_layer(teacher), kScoreLayer);
  const int t_out = output_size(teacher, 203);
  const NetworkSpec student = surgery(teacher);
  const int s_out = output_size(student, 107);
  Rng rng(kSeed + 3);
  const Network t_net = Network::random(teacher, rng);
  const Network s_net(student, t_net.weights());
  const bool shapes = expected_weight_shapes(teacher) == expected_weight_shapes(student) &&
                      s_net.weights().encode() == t_net.weights().encode();
  return {score.rf == 171 && score.jump == 16 && t_out == 14 && s_out == 14 && shapes,
          format("score rf=%d jump=%d, teacher@203=%d, student@107=%d, weights %s", score.rf, score.jump,
                 t_out, s_out, shapes ? "byte-identical" : "DIFFER")};
}

DistillJob distill_job(int iterations) {
  DistillJob job;
  job.teacher_spec = tiny_teacher_spec();
  Rng rng(kSeed + 4);
  job.teacher_weights = Network::random(job.teacher_spec, rng).weights();
  for (const auto& c : preset_suite("easy", kSeed)) {
    SynthConfig cc = c;
    cc.length = 5;
    for (auto& f : generate(cc).frames) job.images.push_back(std::move(f));
  }
  job.patches = kDistillPatches;
  job.config.iterations = iterations;
  job.config.seed = kSeed;
  job.data_seed = kSeed + 5;
  return job;
}

Outcome distill_check() {
  const DistillJob job = distill_job(kDistillIterations);
  auto t0 = Clock::now();
  const DistillReport a = run_distill(job);
  const double secs = seconds_since(t0);
  const DistillReport b = run_distill(job);
  const bool same = a.student_weights == b.student_weights && a.train_loss == b.train_loss &&
                    a.heldout_final == b.heldout_final;
  const double reduction = 1.0 - a.heldout_final / a.heldout_initial;
  return {reduction >= kDistillReduction && same && secs < kDistillSeconds,
          format("held-out MSE %.4g -> %.4g, reduction %.1f%% (need >= %.0f%%), repeat %s, %.1f s",
                 a.heldout_initial, a.heldout_final, 100.0 * reduction, 100.0 * kDistillReduction,
                 same ? "identical" : "DIFFERS", secs)};
}

Outcome metric_check() {
  int bad = 0, total = 0;
  std::string first_bad;
  for (const auto& c : testing::metric_fixtures()) {
    ++total;
    if (!(std::abs(c.got - c.expected) <= kMetricTol)) {
      if (bad++ == 0) first_bad = c.name;
    }
  }
  const int violations = testing::monotonicity_violations(kMonotoneTrajectories, kSeed + 6);
  return {bad == 0 && violations == 0,
          format("%d/%d fixtures within 1e-9%s%s, %d/%d random trajectories non-monotone", total - bad, total,
                 bad ? ", first miss: " : "", first_bad.c_str(), violations, kMonotoneTrajectories)};
}

RunConfig base_config() {
  RunConfig cfg;
  cfg.tracker.seed = kSeed;
  cfg.backbone.seed = kSeed;
  return cfg;
}

Outcome tracking_check() {
  const auto t0 = Clock::now();
  const RunConfig cfg = base_config();
  const auto seqs = load_suite("easy", kSeed);
  const auto net = make_backbone(cfg.backbone);
  const auto out = evaluate_suite(cfg, seqs, net);
  double mean = 0.0;
  int clean = 0;
  for (const auto& o : out) {
    mean += o.mean_iou;
    clean += o.no_failure;
    std::printf("    %-10s mIoU %.3f failures %s\n", o.name.c_str(), o.mean_iou, o.no_failure ? "none" : "yes");
  }
  mean /= static_cast<double>(out.size());
  const double secs = seconds_since(t0);
  return {mean >= kEasyMeanIou && clean >= kEasyCleanSequences && secs < kEasySeconds,
          format("easy suite mean IoU %.3f (need >= %.2f), %d/%zu sequences without failure (need >= %d), %.0f s",
                 mean, kEasyMeanIou, clean, out.size(), kEasyCleanSequences, secs)};
}

Outcome ablation_check() {
  const auto seqs = load_suite("drift-prone", kSeed);
  RunConfig full = base_config();
  RunConfig beta0 = full;
  beta0.loss.beta = 0.0;
  beta0.loss.scheme_a = MatchScheme::anchor_matched(0.7);
  RunConfig alpha0 = full;
  alpha0.loss.alpha = 0.0;
  alpha0.loss.scheme_q = MatchScheme::all_positions();
  const auto net = make_backbone(full.backbone);
  struct Arm {
    const char* name;
    double iou = 0.0, inflation = 0.0;
  };
  auto run = [&](const char* name, const RunConfig& cfg) {
    Arm a{name};
    for (const auto& o : evaluate_suite(cfg, seqs, net)) {
      a.iou += o.mean_iou;
      a.inflation += o.area_inflation;
    }
    a.iou /= static_cast<double>(seqs.size());
    a.inflation /= static_cast<double>(seqs.size());
    std::printf("    %-6s mIoU %.3f area inflation %.3f\n", a.name, a.iou, a.inflation);
    return a;
  };
  const Arm f = run("full", full), b = run("beta0", beta0), q = run("alpha0", alpha0);
  return {f.iou >= b.iou && f.iou >= q.iou && b.inflation > f.inflation,
          format("mIoU full %.3f, beta0 %.3f, alpha0 %.3f; area inflation beta0 %.3f vs full %.3f", f.iou, b.iou,
                 q.iou, b.inflation, f.inflation)};
}

Outcome determinism_check() {
  const fs::path dir = fs::temp_directory_path() / "rpn2t_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const RunConfig cfg = base_config();
  SynthConfig sc = preset_suite("drift-prone", kSeed).front();
  sc.length = 8;
  const Sequence seq = to_sequence(generate(sc));
  for (int run = 0; run < 2; ++run) {
    const auto net = make_backbone(cfg.backbone);
    track_to_results(cfg, seq, net).save(dir / ("track" + std::to_string(run) + ".json"));
    const DistillJob job = distill_job(40);
    const DistillReport rep = run_distill(job);
    rep.student_weights.save(dir / ("student" + std::to_string(run) + ".bin"));
    write_file_atomic(dir / ("distill" + std::to_string(run) + ".json"), distill_report_json(rep, job));
  }
  const bool track_same = read_file(dir / "track0.json") == read_file(dir / "track1.json");
  const bool weights_same = read_file(dir / "student0.bin") == read_file(dir / "student1.bin");
  const bool report_same = read_file(dir / "distill0.json") == read_file(dir / "distill1.json");
  fs::remove_all(dir);
  return {track_same && weights_same && report_same,
          format("track results %s, distilled weights %s, distill report %s", track_same ? "identical" : "DIFFER",
                 weights_same ? "identical" : "DIFFER", report_same ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int only = 0;
  app.add_option("--only", only, "run a single criterion (1-8)")->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);
  std::setvbuf(stdout, nullptr, _IONBF, 0);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite_check},   {"anchor oracle", anchor_check},
      {"sizing arithmetic", sizing_check},        {"distillation", distill_check},
      {"metric oracles", metric_check},           {"end-to-end tracking", tracking_check},
      {"ablation direction", ablation_check},     {"determinism", determinism_check},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (only != 0 && only != id) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
