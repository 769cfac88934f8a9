#include "rpn2t/pipeline.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "rpn2t/error.hpp"

namespace rpn2t {

Sequence to_sequence(SynthSequence s) {
  Sequence out;
  out.name = std::move(s.name);
  out.frames = std::move(s.frames);
  out.groundtruth = std::move(s.groundtruth);
  return out;
}

std::vector<Sequence> load_suite(const std::string& preset, std::uint64_t seed) {
  std::vector<Sequence> out;
  for (const auto& c : preset_suite(preset, seed)) out.push_back(to_sequence(generate(c)));
  return out;
}

std::vector<Sequence> load_sequences(const std::vector<std::filesystem::path>& dirs, bool one_based) {
  std::vector<Sequence> out;
  for (const auto& d : dirs) out.push_back(load_sequence(d, one_based));
  return out;
}

Results track_to_results(const RunConfig& cfg, const Sequence& seq,
                         std::shared_ptr<const Network> backbone) {
  cfg.validate();
  if (seq.frames.empty()) throw DataError("sequence has no frames");
  const TrackResult tr = track_sequence(seq.frames, seq.groundtruth.front(), std::move(backbone),
                                        cfg.tracker, cfg.loss, cfg.grid);
  Results r;
  r.config = cfg.entries();
  r.seed = cfg.tracker.seed;
  r.sequence = seq.name;
  r.boxes = tr.boxes;
  r.scores = tr.scores;
  for (size_t i = 0; i < tr.boxes.size(); ++i) {
    r.flags.push_back(flag_string(i == 0 ? kInit : (tr.success[i] ? kTracked : kTracked | kFailed)));
  }
  const OtbMetrics m = otb_metrics(tr.boxes, seq.groundtruth);
  r.metrics = {{"auc", m.auc}, {"mean_iou", m.mean_iou}, {"precision20", m.precision20}};
  return r;
}

double area_inflation(const std::vector<Rect>& boxes, const std::vector<Rect>& gt) {
  if (boxes.empty() || boxes.size() != gt.size()) throw DataError("trajectory and groundtruth differ in length");
  return (boxes.back().area() / boxes.front().area()) / (gt.back().area() / gt.front().area());
}

SequenceOutcome evaluate_sequence(const RunConfig& cfg, const Sequence& seq,
                                  std::shared_ptr<const Network> backbone) {
  cfg.validate();
  SequenceOutcome o;
  o.name = seq.name;
  o.track = track_sequence(seq.frames, seq.groundtruth.front(), std::move(backbone), cfg.tracker,
                           cfg.loss, cfg.grid);
  const auto ov = overlaps(o.track.boxes, seq.groundtruth);
  double s = 0.0;
  for (double v : ov) {
    s += v;
    if (v == 0.0) o.no_failure = false;
  }
  o.mean_iou = s / static_cast<double>(ov.size());
  o.area_inflation = area_inflation(o.track.boxes, seq.groundtruth);
  return o;
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<SequenceOutcome> evaluate_suite(const RunConfig& cfg, const std::vector<Sequence>& seqs,
                                            std::shared_ptr<const Network> backbone, int jobs) {
  std::vector<SequenceOutcome> out(seqs.size());
  parallel_for(static_cast<int>(seqs.size()), jobs, [&](int i) {
    out[static_cast<size_t>(i)] = evaluate_sequence(cfg, seqs[static_cast<size_t>(i)], backbone);
  });
  return out;
}

VotRun vot_sequence(const RunConfig& cfg, const Sequence& seq,
                    std::shared_ptr<const Network> backbone, int repeat) {
  cfg.validate();
  TrackerConfig tc = cfg.tracker;
  tc.seed += static_cast<std::uint64_t>(repeat);
  Tracker tracker(std::move(backbone), tc, cfg.loss, cfg.grid);
  return vot_run(tracker, seq.frames, seq.groundtruth, cfg.eval);
}

DistillReport run_distill(const DistillJob& job) {
  if (job.images.empty()) throw DataError("no images to distill on");
  const Network teacher(job.teacher_spec, job.teacher_weights);
  const Network student(surgery(job.teacher_spec), job.teacher_weights);
  const auto train = random_patches(job.images, job.patches, job.patch_size, job.data_seed);
  const auto held = random_patches(job.images, job.heldout, job.patch_size, job.data_seed + 1);
  return distill(teacher, student, train, held, job.config);
}

std::string distill_report_json(const DistillReport& report, const DistillJob& job) {
  nlohmann::json j;
  j["iterations"] = job.config.iterations;
  j["lr"] = job.config.lr;
  j["momentum"] = job.config.momentum;
  j["batch_size"] = job.config.batch_size;
  j["seed"] = job.config.seed;
  j["data_seed"] = job.data_seed;
  j["patches"] = job.patches;
  j["heldout_patches"] = job.heldout;
  j["heldout_initial"] = report.heldout_initial;
  j["heldout_final"] = report.heldout_final;
  j["reduction"] = report.heldout_initial > 0.0 ? 1.0 - report.heldout_final / report.heldout_initial : 0.0;
  j["train_loss"] = report.train_loss;
  return j.dump(2) + "\n";
}

}  // namespace rpn2t
