#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rpn2t/distill.hpp"
#include "rpn2t/evalbench.hpp"
#include "rpn2t/run_config.hpp"
#include "rpn2t/sequence_io.hpp"
#include "rpn2t/synthseq.hpp"
#include "rpn2t/tracker.hpp"

namespace rpn2t {

Sequence to_sequence(SynthSequence s);

// Either a preset suite name or a list of sequence directories.
std::vector<Sequence> load_suite(const std::string& preset, std::uint64_t seed = 0);
std::vector<Sequence> load_sequences(const std::vector<std::filesystem::path>& dirs,
                                     bool one_based = false);

/// One tracking run with the run's embedded config; metrics are filled from
/// the sequence groundtruth.
Results track_to_results(const RunConfig& cfg, const Sequence& seq,
                         std::shared_ptr<const Network> backbone);

// (final area / initial area) of the boxes over the same ratio of groundtruth.
double area_inflation(const std::vector<Rect>& boxes, const std::vector<Rect>& gt);

struct SequenceOutcome {
  std::string name;
  double mean_iou = 0.0;
  double area_inflation = 1.0;
  // No frame with zero overlap. Equivalent to zero failures under the
  // re-initialising protocol, which replays the same calls up to the first one.
  bool no_failure = true;
  TrackResult track;
};

SequenceOutcome evaluate_sequence(const RunConfig& cfg, const Sequence& seq,
                                  std::shared_ptr<const Network> backbone);

// Runs `fn(i)` for i in [0, n) on up to `jobs` threads.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

std::vector<SequenceOutcome> evaluate_suite(const RunConfig& cfg, const std::vector<Sequence>& seqs,
                                            std::shared_ptr<const Network> backbone, int jobs = 1);

/// Re-initialising protocol; repeat r uses tracker seed + r.
VotRun vot_sequence(const RunConfig& cfg, const Sequence& seq,
                    std::shared_ptr<const Network> backbone, int repeat);

struct DistillJob {
  NetworkSpec teacher_spec = tiny_teacher_spec();
  WeightSet teacher_weights;
  std::vector<Image> images;  // frames patches are cut from
  int patches = 64;
  int heldout = 16;
  int patch_size = 203;
  std::uint64_t data_seed = 0;
  DistillConfig config;
};

// Student is surgery(teacher) initialised with the teacher weights.
DistillReport run_distill(const DistillJob& job);
std::string distill_report_json(const DistillReport& report, const DistillJob& job);

}  // namespace rpn2t
