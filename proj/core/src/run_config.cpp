#include "rpn2t/run_config.hpp"

#include <charconv>
#include <filesystem>
#include <functional>
#include <sstream>

#include "rpn2t/error.hpp"
#include "rpn2t/fileio.hpp"

namespace rpn2t {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw UsageError("'" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw UsageError("'" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

#define INT_FIELD(KEY, MEMBER)                                                            \
  Field {                                                                                 \
    KEY, [](const RunConfig& c) { return std::to_string(c.MEMBER); },                     \
        [](RunConfig& c, const std::string& k, const std::string& v) {                    \
          c.MEMBER = parse_integer<std::decay_t<decltype(c.MEMBER)>>(k, v);               \
        }                                                                                 \
  }
#define REAL_FIELD(KEY, MEMBER)                                                           \
  Field {                                                                                 \
    KEY, [](const RunConfig& c) { return fmt(c.MEMBER); },                                \
        [](RunConfig& c, const std::string& k, const std::string& v) {                    \
          c.MEMBER = static_cast<std::decay_t<decltype(c.MEMBER)>>(parse_double(k, v));   \
        }                                                                                 \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      INT_FIELD("tracker.n_pos_init", tracker.n_pos_init),
      INT_FIELD("tracker.n_neg_init", tracker.n_neg_init),
      INT_FIELD("tracker.init_iters", tracker.init_iters),
      INT_FIELD("tracker.n_candidates", tracker.n_candidates),
      REAL_FIELD("tracker.trans_sigma", tracker.trans_sigma),
      REAL_FIELD("tracker.scale_step", tracker.scale_step),
      REAL_FIELD("tracker.scale_sigma", tracker.scale_sigma),
      REAL_FIELD("tracker.pos_iou", tracker.pos_iou),
      REAL_FIELD("tracker.neg_iou", tracker.neg_iou),
      REAL_FIELD("tracker.success_threshold", tracker.success_threshold),
      INT_FIELD("tracker.short_memory", tracker.short_memory),
      INT_FIELD("tracker.long_memory", tracker.long_memory),
      INT_FIELD("tracker.long_interval", tracker.long_interval),
      INT_FIELD("tracker.update_iters", tracker.update_iters),
      INT_FIELD("tracker.per_frame_pos", tracker.per_frame_pos),
      INT_FIELD("tracker.per_frame_neg", tracker.per_frame_neg),
      INT_FIELD("tracker.minibatch_pos", tracker.minibatch_pos),
      INT_FIELD("tracker.minibatch_neg", tracker.minibatch_neg),
      INT_FIELD("tracker.hard_neg_pool", tracker.hard_neg_pool),
      REAL_FIELD("tracker.lr_init", tracker.lr_init),
      REAL_FIELD("tracker.lr_update", tracker.lr_update),
      REAL_FIELD("tracker.momentum", tracker.momentum),
      REAL_FIELD("tracker.weight_decay", tracker.weight_decay),
      INT_FIELD("tracker.head_channels", tracker.head_channels),
      INT_FIELD("tracker.top_k", tracker.top_k),
      REAL_FIELD("tracker.failure_expand", tracker.failure_expand),
      INT_FIELD("tracker.feature_batch", tracker.feature_batch),
      REAL_FIELD("tracker.pixel_mean_r", tracker.norm.mean[0]),
      REAL_FIELD("tracker.pixel_mean_g", tracker.norm.mean[1]),
      REAL_FIELD("tracker.pixel_mean_b", tracker.norm.mean[2]),
      REAL_FIELD("tracker.pixel_scale", tracker.norm.scale),
      INT_FIELD("tracker.seed", tracker.seed),
      REAL_FIELD("loss.alpha", loss.alpha),
      REAL_FIELD("loss.beta", loss.beta),
      Field{"loss.scheme_a", [](const RunConfig& c) { return c.loss.scheme_a.to_string(); },
            [](RunConfig& c, const std::string&, const std::string& v) {
              c.loss.scheme_a = MatchScheme::parse(v);
            }},
      Field{"loss.scheme_q", [](const RunConfig& c) { return c.loss.scheme_q.to_string(); },
            [](RunConfig& c, const std::string&, const std::string& v) {
              c.loss.scheme_q = MatchScheme::parse(v);
            }},
      INT_FIELD("grid.patch_size", grid.patch_size),
      INT_FIELD("grid.grid_size", grid.grid_size),
      INT_FIELD("grid.stride", grid.stride),
      INT_FIELD("grid.anchor_side", grid.anchor_side),
      INT_FIELD("eval.reset_delay", eval.reset_delay),
      INT_FIELD("eval.burnin", eval.burnin),
      INT_FIELD("eval.eao_lo", eval.eao_lo),
      INT_FIELD("eval.eao_hi", eval.eao_hi),
      Field{"backbone.spec", [](const RunConfig& c) { return c.backbone.spec; },
            [](RunConfig& c, const std::string&, const std::string& v) { c.backbone.spec = v; }},
      Field{"backbone.weights", [](const RunConfig& c) { return c.backbone.weights; },
            [](RunConfig& c, const std::string&, const std::string& v) { c.backbone.weights = v; }},
      INT_FIELD("backbone.seed", backbone.seed),
  };
  return table;
}

#undef INT_FIELD
#undef REAL_FIELD

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw UsageError("unknown config key '" + key + "'");
}

}  // namespace

void RunConfig::validate() const {
  tracker.validate();
  loss.validate();
  grid.validate();
  eval.validate();
  if (backbone.spec.empty()) throw UsageError("backbone.spec must not be empty");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  find_field(key).set(*this, key, trim(value));
}

std::string RunConfig::get(const std::string& key) const { return find_field(key).get(*this); }

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.key);
  return out;
}

void RunConfig::apply_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw UsageError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::apply_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      apply_assignment(line);
    } catch (const UsageError& e) {
      throw UsageError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(*this));
  return out;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + " = " + v + "\n";
  return out;
}

NetworkSpec resolve_backbone_spec(const std::string& name) {
  if (name == "tiny") return surgery(tiny_teacher_spec());
  if (name == "reference") return surgery(reference_teacher_spec());
  if (name == "tiny-teacher") return tiny_teacher_spec();
  if (name == "reference-teacher") return reference_teacher_spec();
  if (!std::filesystem::exists(name)) throw UsageError("unknown backbone spec '" + name + "'");
  return NetworkSpec::parse(read_file(name));
}

std::shared_ptr<const Network> make_backbone(const BackboneConfig& cfg) {
  const NetworkSpec spec = resolve_backbone_spec(cfg.spec);
  if (cfg.weights.empty()) {
    Rng rng(cfg.seed);
    return std::make_shared<const Network>(Network::random(spec, rng));
  }
  return std::make_shared<const Network>(spec, WeightSet::load(cfg.weights));
}

}  // namespace rpn2t
