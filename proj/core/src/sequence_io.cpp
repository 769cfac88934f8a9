#include "rpn2t/sequence_io.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "rpn2t/error.hpp"
#include "rpn2t/fileio.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rpn2t {

std::vector<Rect> parse_groundtruth(const std::string& text, bool one_based) {
  std::vector<Rect> out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::replace_if(line.begin(), line.end(), [](char c) { return c == ',' || c == '\t' || c == '\r'; }, ' ');
    std::istringstream ls(line);
    double v[4];
    int n = 0;
    while (n < 4 && ls >> v[n]) ++n;
    if (n == 0 && ls.eof()) continue;
    std::string rest;
    if (n != 4 || (ls >> rest)) {
      throw DataError("groundtruth line " + std::to_string(lineno) + " is not x,y,w,h");
    }
    const double shift = one_based ? 1.0 : 0.0;
    Rect r{v[0] - shift, v[1] - shift, v[2], v[3]};
    if (!r.valid()) throw DataError("groundtruth line " + std::to_string(lineno) + " has a degenerate box");
    out.push_back(r);
  }
  return out;
}

std::string format_groundtruth(const std::vector<Rect>& boxes) {
  std::ostringstream os;
  os.precision(17);
  for (const auto& r : boxes) os << r.x << ',' << r.y << ',' << r.w << ',' << r.h << '\n';
  return os.str();
}

Sequence load_sequence(const fs::path& dir, bool one_based) {
  const fs::path frames_dir = dir / "frames";
  if (!fs::is_directory(frames_dir)) throw DataError("missing " + frames_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(frames_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Sequence seq;
  seq.name = dir.filename().string();
  if (seq.name.empty()) seq.name = dir.parent_path().filename().string();
  seq.groundtruth = parse_groundtruth(read_file(dir / "groundtruth_rect.txt"), one_based);
  if (files.empty()) throw DataError("no frames in " + frames_dir.string());
  if (files.size() != seq.groundtruth.size()) {
    throw DataError(dir.string() + ": " + std::to_string(files.size()) + " frames but " +
                    std::to_string(seq.groundtruth.size()) + " groundtruth boxes");
  }
  for (const auto& f : files) seq.frames.push_back(load_png(f));
  for (const auto& f : seq.frames) {
    if (f.width != seq.frames.front().width || f.height != seq.frames.front().height ||
        f.channels != seq.frames.front().channels) {
      throw DataError(dir.string() + ": frame sizes differ");
    }
  }
  return seq;
}

void save_sequence(const Sequence& seq, const fs::path& dir) {
  if (seq.frames.size() != seq.groundtruth.size()) throw UsageError("frame and box counts differ");
  fs::create_directories(dir / "frames");
  char name[32];
  for (size_t i = 0; i < seq.frames.size(); ++i) {
    std::snprintf(name, sizeof name, "%06zu.png", i + 1);
    save_png(seq.frames[i], dir / "frames" / name);
  }
  write_file_atomic(dir / "groundtruth_rect.txt", format_groundtruth(seq.groundtruth));
}

std::string Results::to_json() const {
  json j;
  json cfg = json::object();
  for (const auto& [k, v] : config) cfg[k] = v;
  j["config"] = cfg;
  j["seed"] = seed;
  j["sequence"] = sequence;
  json b = json::array();
  for (const auto& r : boxes) b.push_back({r.x, r.y, r.w, r.h});
  j["boxes"] = b;
  j["scores"] = scores;
  j["flags"] = flags;
  json m = json::object();
  for (const auto& [k, v] : metrics) m[k] = v;
  j["metrics"] = m;
  return j.dump(2) + "\n";
}

Results Results::from_json(const std::string& text) {
  Results r;
  try {
    const json j = json::parse(text);
    for (const auto& [k, v] : j.at("config").items()) r.config.emplace_back(k, v.get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.sequence = j.value("sequence", std::string());
    for (const auto& b : j.at("boxes")) {
      if (b.size() != 4) throw DataError("box entries must have four numbers");
      r.boxes.push_back(Rect{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
    }
    r.scores = j.at("scores").get<std::vector<double>>();
    r.flags = j.at("flags").get<std::vector<std::string>>();
    for (const auto& [k, v] : j.at("metrics").items()) r.metrics.emplace_back(k, v.get<double>());
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed results file: ") + e.what());
  }
  return r;
}

void Results::save(const fs::path& path) const { write_file_atomic(path, to_json()); }

Results Results::load(const fs::path& path) { return from_json(read_file(path)); }

}  // namespace rpn2t
