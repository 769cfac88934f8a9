#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rpn2t/error.hpp"
#include "rpn2t/fileio.hpp"
#include "rpn2t/pipeline.hpp"

using namespace rpn2t;
namespace fs = std::filesystem;

namespace {

constexpr const char* kPresetPrefix = "preset:";

struct ConfigArgs {
  std::string file;
  std::vector<std::string> sets;
  bool one_based = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "key = value config file");
    cmd->add_option("--set", sets, "override, key=value (repeatable)");
    cmd->add_flag("--one-based", one_based, "groundtruth files use 1-based coordinates");
  }

  // defaults < file < command line
  RunConfig resolve() const {
    RunConfig cfg;
    if (!file.empty()) cfg.apply_text(read_file(file));
    for (const auto& s : sets) cfg.apply_assignment(s);
    cfg.validate();
    return cfg;
  }
};

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

// A `preset:<name>` token, a directory holding one sequence, or a directory
// whose subdirectories are sequences.
std::vector<Sequence> expand_sequences(const std::vector<std::string>& args, bool one_based,
                                       std::uint64_t seed) {
  std::vector<Sequence> out;
  for (const auto& a : args) {
    if (a.starts_with(kPresetPrefix)) {
      for (auto& s : load_suite(a.substr(std::string(kPresetPrefix).size()), seed)) out.push_back(std::move(s));
      continue;
    }
    const fs::path p(a);
    if (fs::is_directory(p / "frames")) {
      out.push_back(load_sequence(p, one_based));
      continue;
    }
    if (!fs::is_directory(p)) throw DataError("no sequence at " + a);
    std::vector<fs::path> subs;
    for (const auto& e : fs::directory_iterator(p)) {
      if (e.is_directory() && fs::is_directory(e.path() / "frames")) subs.push_back(e.path());
    }
    if (subs.empty()) throw DataError("no sequences under " + a);
    std::sort(subs.begin(), subs.end());
    for (const auto& s : subs) out.push_back(load_sequence(s, one_based));
  }
  return out;
}

std::vector<Image> load_images(const std::string& where) {
  std::vector<Image> out;
  if (where.starts_with(kPresetPrefix)) {
    for (auto& s : load_suite(where.substr(std::string(kPresetPrefix).size())))
      for (auto& f : s.frames) out.push_back(std::move(f));
    return out;
  }
  if (!fs::is_directory(where)) throw DataError("not a directory: " + where);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(where)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no PNG images under " + where);
  for (const auto& f : files) out.push_back(load_png(f));
  return out;
}

void print_row(const std::string& name, const std::vector<double>& values, const char* fmt = "%9.4f") {
  std::printf("%-16s", name.c_str());
  for (double v : values) std::printf(fmt, v);
  std::printf("\n");
}

// --- subcommands -------------------------------------------------------------

int cmd_track(const std::string& seq_dir, const std::string& weights, const std::string& out,
              const ConfigArgs& ca) {
  RunConfig cfg = ca.resolve();
  if (!weights.empty()) cfg.backbone.weights = weights;
  const Sequence seq = load_sequence(seq_dir, ca.one_based);
  const Results r = track_to_results(cfg, seq, make_backbone(cfg.backbone));
  r.save(out);
  for (const auto& [k, v] : r.metrics) std::printf("%s %.6f\n", k.c_str(), v);
  return 0;
}

int cmd_eval_otb(const std::vector<std::string>& inputs, const std::string& csv_dir, bool one_based) {
  std::vector<std::string> results, dirs;
  for (const auto& i : inputs) (fs::path(i).extension() == ".json" ? results : dirs).push_back(i);
  if (results.empty()) throw UsageError("eval-otb needs at least one results file");
  if (results.size() != dirs.size()) throw UsageError("eval-otb pairs results files with sequence directories in order");
  if (!csv_dir.empty()) fs::create_directories(csv_dir);
  std::printf("%-16s%9s%9s%9s\n", "Sequence", "Prec@20", "AUC", "mIoU");
  double p = 0.0, a = 0.0, m = 0.0;
  for (size_t i = 0; i < results.size(); ++i) {
    const Results r = Results::load(results[i]);
    const Sequence seq = load_sequence(dirs[i], one_based);
    const OtbMetrics om = otb_metrics(r.boxes, seq.groundtruth);
    const std::string name = r.sequence.empty() ? seq.name : r.sequence;
    print_row(name, {om.precision20, om.auc, om.mean_iou});
    p += om.precision20;
    a += om.auc;
    m += om.mean_iou;
    if (!csv_dir.empty()) {
      write_file_atomic(fs::path(csv_dir) / (name + "_precision.csv"), curve_csv(om.precision, "precision"));
      write_file_atomic(fs::path(csv_dir) / (name + "_success.csv"), curve_csv(om.success, "success"));
    }
  }
  const double n = static_cast<double>(results.size());
  print_row("mean", {p / n, a / n, m / n});
  return 0;
}

int cmd_eval_vot(const std::string& config_file, const std::vector<std::string>& seqs, int repeats,
                 const std::string& name, const std::string& out_dir, int jobs, const ConfigArgs& ca) {
  ConfigArgs local = ca;
  local.file = config_file;
  const RunConfig cfg = local.resolve();
  if (repeats < 1) throw UsageError("--repeats must be at least 1");
  const auto sequences = expand_sequences(seqs, ca.one_based, cfg.tracker.seed);
  const auto net = make_backbone(cfg.backbone);
  std::vector<std::vector<VotRun>> runs(sequences.size(), std::vector<VotRun>(static_cast<size_t>(repeats)));
  const int total = static_cast<int>(sequences.size()) * repeats;
  parallel_for(total, jobs, [&](int k) {
    const size_t s = static_cast<size_t>(k / repeats), r = static_cast<size_t>(k % repeats);
    runs[s][r] = vot_sequence(cfg, sequences[s], net, static_cast<int>(r));
  });
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    for (size_t s = 0; s < sequences.size(); ++s) {
      for (size_t r = 0; r < runs[s].size(); ++r) {
        const VotRun& run = runs[s][r];
        Results res;
        res.config = cfg.entries();
        res.seed = cfg.tracker.seed + r;
        res.sequence = sequences[s].name;
        res.boxes = run.trajectory.boxes;
        res.scores.assign(res.boxes.size(), 0.0);
        for (auto f : run.trajectory.flags) res.flags.push_back(flag_string(f));
        res.metrics = {{"accuracy", vot_accuracy(run)}, {"failures", static_cast<double>(run.failures)}};
        if (std::isnan(res.metrics[0].second)) res.metrics.erase(res.metrics.begin());
        res.save(fs::path(out_dir) / (sequences[s].name + "_r" + std::to_string(r) + ".json"));
      }
    }
  }
  const VotScores sc = vot_scores(runs, cfg.eval);
  std::fputs(render_table({{name.empty() ? stem_of(config_file) : name, sc.eao, sc.accuracy, sc.robustness}}).c_str(),
             stdout);
  return 0;
}

int cmd_ablate(const std::string& suite, const std::string& file_a, const std::string& file_b, int jobs,
               const std::string& out, const ConfigArgs& ca) {
  ConfigArgs la = ca, lb = ca;
  la.file = file_a;
  lb.file = file_b;
  const RunConfig a = la.resolve(), b = lb.resolve();
  const std::string arg = fs::exists(suite) ? suite : std::string(kPresetPrefix) + suite;
  const auto seqs = expand_sequences({arg}, ca.one_based, a.tracker.seed);
  const auto net_a = make_backbone(a.backbone);
  const auto net_b = a.backbone.spec == b.backbone.spec && a.backbone.weights == b.backbone.weights &&
                             a.backbone.seed == b.backbone.seed
                         ? net_a
                         : make_backbone(b.backbone);
  const auto ra = evaluate_suite(a, seqs, net_a, jobs);
  const auto rb = evaluate_suite(b, seqs, net_b, jobs);
  const std::string na = stem_of(file_a), nb = stem_of(file_b);
  std::printf("%-16s%9s%9s%9s%9s%9s\n", "Sequence", ("IoU:" + na.substr(0, 4)).c_str(),
              ("IoU:" + nb.substr(0, 4)).c_str(), "diff", "infl:A", "infl:B");
  double sa = 0, sb = 0, ia = 0, ib = 0;
  int wins = 0;
  nlohmann::json j;
  for (size_t i = 0; i < seqs.size(); ++i) {
    print_row(seqs[i].name, {ra[i].mean_iou, rb[i].mean_iou, ra[i].mean_iou - rb[i].mean_iou,
                             ra[i].area_inflation, rb[i].area_inflation});
    sa += ra[i].mean_iou;
    sb += rb[i].mean_iou;
    ia += ra[i].area_inflation;
    ib += rb[i].area_inflation;
    wins += ra[i].mean_iou >= rb[i].mean_iou;
    j["sequences"].push_back({{"name", seqs[i].name},
                              {"iou_a", ra[i].mean_iou},
                              {"iou_b", rb[i].mean_iou},
                              {"inflation_a", ra[i].area_inflation},
                              {"inflation_b", rb[i].area_inflation}});
  }
  const double n = static_cast<double>(seqs.size());
  print_row("mean", {sa / n, sb / n, (sa - sb) / n, ia / n, ib / n});
  std::printf("A >= B on %d/%zu sequences\n", wins, seqs.size());
  if (!out.empty()) {
    j["config_a"] = file_a;
    j["config_b"] = file_b;
    j["mean_iou_a"] = sa / n;
    j["mean_iou_b"] = sb / n;
    write_file_atomic(out, j.dump(2) + "\n");
  }
  return 0;
}

struct DistillArgs {
  std::string teacher, teacher_spec = "tiny-teacher", images, out, report;
  DistillJob job;
};

int cmd_distill(DistillArgs& d) {
  d.job.teacher_spec = resolve_backbone_spec(d.teacher_spec);
  d.job.teacher_weights = WeightSet::load(d.teacher);
  d.job.images = load_images(d.images);
  d.job.patch_size = d.job.teacher_spec.input_size;
  const DistillReport rep = run_distill(d.job);
  rep.student_weights.save(d.out);
  if (!d.report.empty()) write_file_atomic(d.report, distill_report_json(rep, d.job));
  std::printf("heldout_initial %.6g\nheldout_final %.6g\nreduction %.4f\n", rep.heldout_initial,
              rep.heldout_final, 1.0 - rep.heldout_final / rep.heldout_initial);
  return 0;
}

int cmd_init_weights(const std::string& spec, std::uint64_t seed, const std::string& out) {
  Rng rng(seed);
  Network::random(resolve_backbone_spec(spec), rng).weights().save(out);
  return 0;
}

int cmd_surgery(const std::string& spec, const std::string& out, int input) {
  const NetworkSpec s = surgery(resolve_backbone_spec(spec), input);
  if (out.empty() || out == "-") {
    std::fputs(s.to_text().c_str(), stdout);
  } else {
    write_file_atomic(out, s.to_text());
  }
  return 0;
}

int cmd_rf(const std::string& spec_name, bool no_score) {
  NetworkSpec spec = resolve_backbone_spec(spec_name);
  if (!no_score) spec = with_score_layer(spec);
  const auto sizes = layer_output_sizes(spec, spec.input_size);
  std::printf("%-10s%6s%6s%6s\n", "layer", "rf", "jump", "size");
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const RFInfo r = receptive_field(spec, spec.layers[i].name);
    std::printf("%-10s%6d%6d%6d\n", spec.layers[i].name.c_str(), r.rf, r.jump, sizes[i]);
  }
  const RFInfo last = receptive_field(spec, spec.layers.back().name);
  std::printf("rf=%d jump=%d size@%d=%d\n", last.rf, last.jump, spec.input_size, last.size);
  return 0;
}

int cmd_labelmap(double tau, const std::string& scheme_name, const std::string& cls, const std::string& gt_text,
                 const std::string& csv) {
  const AnchorGridConfig g;
  MatchScheme scheme;
  if (scheme_name == "anchor") {
    scheme = MatchScheme::anchor_matched(tau);
  } else {
    scheme = MatchScheme::parse(scheme_name);
  }
  Rect gt = canonical_target(g);
  if (!gt_text.empty()) {
    const auto boxes = parse_groundtruth(gt_text);
    if (boxes.size() != 1) throw UsageError("--gt takes a single x,y,w,h box");
    gt = boxes.front();
  }
  if (cls != "positive" && cls != "negative") throw UsageError("--class is positive or negative");
  const LabelMap m = label_map(cls == "positive" ? SampleClass::Positive : SampleClass::Negative,
                               match_anchors(gt, g, scheme), g);
  std::fputs(m.to_text().c_str(), stdout);
  if (!csv.empty()) write_file_atomic(csv, m.to_csv());
  return 0;
}

int cmd_synth(const std::string& preset, const std::string& out, std::uint64_t seed) {
  for (const auto& c : preset_suite(preset, seed)) {
    const Sequence s = to_sequence(generate(c));
    save_sequence(s, fs::path(out) / s.name);
    std::printf("%s\n", (fs::path(out) / s.name).string().c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RPN-style tracking with the dual classification loss"};
  app.require_subcommand(1);
  std::function<int()> action;

  ConfigArgs ca;

  auto* track = app.add_subcommand("track", "track one sequence and write a results file");
  std::string seq_dir, weights, out;
  track->add_option("sequence", seq_dir, "sequence directory")->required();
  track->add_option("--weights", weights, "backbone weights file (default: random from backbone.seed)");
  track->add_option("--out", out, "results JSON")->required();
  ca.attach(track);
  track->callback([&] { action = [&] { return cmd_track(seq_dir, weights, out, ca); }; });

  auto* otb = app.add_subcommand("eval-otb", "precision/success metrics for results files");
  std::vector<std::string> otb_inputs;
  std::string csv_dir;
  bool otb_one_based = false;
  otb->add_option("inputs", otb_inputs, "results files then sequence directories, paired in order")->required();
  otb->add_option("--csv-dir", csv_dir, "write precision and success curves here");
  otb->add_flag("--one-based", otb_one_based, "groundtruth files use 1-based coordinates");
  otb->callback([&] { action = [&] { return cmd_eval_otb(otb_inputs, csv_dir, otb_one_based); }; });

  auto* vot = app.add_subcommand("eval-vot", "re-initialising protocol, EAO/ACC/ROB table");
  std::string vot_config, vot_name, vot_out;
  std::vector<std::string> vot_seqs;
  int repeats = 1, jobs = 1;
  vot->add_option("config", vot_config, "tracker config file")->required();
  vot->add_option("sequences", vot_seqs, "sequence directories or preset:<name>")->required();
  vot->add_option("--repeats", repeats, "runs per sequence");
  vot->add_option("--name", vot_name, "row label (default: config file stem)");
  vot->add_option("--out", vot_out, "directory for per-run trajectories");
  vot->add_option("--jobs", jobs, "parallel runs");
  vot->add_option("--set", ca.sets, "override, key=value (repeatable)");
  vot->add_flag("--one-based", ca.one_based, "groundtruth files use 1-based coordinates");
  vot->callback([&] {
    action = [&] { return cmd_eval_vot(vot_config, vot_seqs, repeats, vot_name, vot_out, jobs, ca); };
  });

  auto* ablate = app.add_subcommand("ablate", "paired runs of two configs over a suite");
  std::string suite, cfg_a, cfg_b, ablate_out;
  ablate->add_option("suite", suite, "preset name or directory of sequences")->required();
  ablate->add_option("--config-a", cfg_a, "first config file")->required();
  ablate->add_option("--config-b", cfg_b, "second config file")->required();
  ablate->add_option("--jobs", jobs, "parallel runs");
  ablate->add_option("--out", ablate_out, "JSON report");
  ablate->add_option("--set", ca.sets, "override applied to both arms, key=value (repeatable)");
  ablate->add_flag("--one-based", ca.one_based, "groundtruth files use 1-based coordinates");
  ablate->callback([&] { action = [&] { return cmd_ablate(suite, cfg_a, cfg_b, jobs, ablate_out, ca); }; });

  auto* dist = app.add_subcommand("distill", "train the surgery student to mimic the teacher");
  DistillArgs da;
  dist->add_option("--teacher", da.teacher, "teacher weights")->required();
  dist->add_option("--teacher-spec", da.teacher_spec, "teacher spec name or file");
  dist->add_option("--images", da.images, "image directory (PNG, recursive) or preset:<name>")->required();
  dist->add_option("--out", da.out, "student weights")->required();
  dist->add_option("--report", da.report, "JSON report with the loss trace");
  dist->add_option("--iterations", da.job.config.iterations, "SGD steps");
  dist->add_option("--lr", da.job.config.lr, "learning rate");
  dist->add_option("--momentum", da.job.config.momentum, "momentum");
  dist->add_option("--batch", da.job.config.batch_size, "patches per step");
  dist->add_option("--patches", da.job.patches, "training patches");
  dist->add_option("--heldout", da.job.heldout, "held-out patches");
  dist->add_option("--seed", da.job.config.seed, "minibatch order seed");
  dist->add_option("--data-seed", da.job.data_seed, "patch sampling seed");
  dist->callback([&] { action = [&] { return cmd_distill(da); }; });

  auto* initw = app.add_subcommand("init-weights", "write He-normal weights for a spec");
  std::string init_spec = "tiny-teacher";
  std::uint64_t init_seed = 0;
  initw->add_option("--spec", init_spec, "spec name or file");
  initw->add_option("--seed", init_seed, "seed");
  initw->add_option("--out", out, "weights file")->required();
  initw->callback([&] { action = [&] { return cmd_init_weights(init_spec, init_seed, out); }; });

  auto* surg = app.add_subcommand("surgery", "drop the first two pools and adjust strides");
  std::string spec = "reference-teacher";
  int student_input = 107;
  surg->add_option("--spec", spec, "teacher spec name or file");
  surg->add_option("--out", out, "student spec file (default: stdout)");
  surg->add_option("--input", student_input, "student input size");
  surg->callback([&] { action = [&] { return cmd_surgery(spec, out, student_input); }; });

  auto* rf = app.add_subcommand("rf", "receptive field, jump and output size per layer");
  bool no_score = false;
  rf->add_option("--spec", spec, "spec name or file");
  rf->add_flag("--no-score", no_score, "leave out the 3x3 score layer");
  rf->callback([&] { action = [&] { return cmd_rf(spec, no_score); }; });

  auto* lm = app.add_subcommand("labelmap", "print a label map");
  double tau = 0.7;
  std::string scheme = "anchor", cls = "positive", gt_text, csv;
  lm->add_option("--tau", tau, "IoU threshold for the anchor scheme");
  lm->add_option("--scheme", scheme, "anchor, all, or anchor:<tau>");
  lm->add_option("--class", cls, "positive or negative patch");
  lm->add_option("--gt", gt_text, "groundtruth x,y,w,h inside the 203 px patch (default: centred 171 square)");
  lm->add_option("--csv", csv, "also write CSV here");
  lm->callback([&] { action = [&] { return cmd_labelmap(tau, scheme, cls, gt_text, csv); }; });

  auto* syn = app.add_subcommand("synth", "render a synthetic suite");
  std::string preset;
  std::uint64_t synth_seed = 0;
  syn->add_option("--preset", preset, "easy, drift-prone or occlusion")->required();
  syn->add_option("--out", out, "output directory")->required();
  syn->add_option("--seed", synth_seed, "suite seed");
  syn->callback([&] { action = [&] { return cmd_synth(preset, out, synth_seed); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  try {
    return action();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
