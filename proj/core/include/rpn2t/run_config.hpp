#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rpn2t/evalbench.hpp"
#include "rpn2t/geometry.hpp"
#include "rpn2t/losses.hpp"
#include "rpn2t/netspec.hpp"
#include "rpn2t/tracker.hpp"

namespace rpn2t {

struct BackboneConfig {
  // "tiny" / "reference" (surgery students at 107), "tiny-teacher" /
  // "reference-teacher" (at 203), or a spec file path.
  std::string spec = "tiny";
  std::string weights;  // empty: He-normal weights drawn from `seed`
  std::uint64_t seed = 0;
};

/// Every tunable of a run. Text form is `key = value` lines with dotted
/// section prefixes (`tracker.lr_init = 0.001`); '#' starts a comment.
struct RunConfig {
  TrackerConfig tracker = TrackerConfig::tiny();
  Rpn2tConfig loss;
  AnchorGridConfig grid;
  VotProtocol eval;
  BackboneConfig backbone;

  void validate() const;

  // Throws UsageError on unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static std::vector<std::string> keys();

  // Applies every assignment in `text` on top of the current values.
  void apply_text(const std::string& text);
  // `key=value` as given on the command line.
  void apply_assignment(const std::string& assignment);

  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string to_text() const;
};

NetworkSpec resolve_backbone_spec(const std::string& name);
std::shared_ptr<const Network> make_backbone(const BackboneConfig& cfg);

}  // namespace rpn2t
