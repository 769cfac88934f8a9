#include "rpn2t/netspec.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "rpn2t/error.hpp"

namespace rpn2t {

namespace {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Relu: return "relu";
  }
  return "?";
}

LayerKind parse_kind(const std::string& s) {
  if (s == "conv") return LayerKind::Conv;
  if (s == "maxpool" || s == "pool") return LayerKind::MaxPool;
  if (s == "relu") return LayerKind::Relu;
  throw UsageError("unknown layer kind '" + s + "'");
}

int layer_out(const LayerSpec& l, int in) {
  switch (l.kind) {
    case LayerKind::Conv: return pooled_size(in, l.kernel, l.stride, l.pad, false);
    case LayerKind::MaxPool: return pooled_size(in, l.kernel, l.stride, l.pad, l.ceil_mode);
    case LayerKind::Relu: return in;
  }
  return in;
}

}  // namespace

void NetworkSpec::validate() const {
  if (input_channels < 1) throw UsageError("network input channels must be positive");
  std::set<std::string> names;
  for (const auto& l : layers) {
    if (l.name.empty()) throw UsageError("layer without a name");
    if (!names.insert(l.name).second) throw UsageError("duplicate layer name '" + l.name + "'");
    if (l.kernel < 1 || l.stride < 1 || l.pad < 0) {
      throw UsageError("layer '" + l.name + "' has invalid kernel/stride/pad");
    }
    if (l.kind == LayerKind::Conv && l.out_channels < 1) {
      throw UsageError("conv layer '" + l.name + "' needs a positive channel count");
    }
  }
  if (input_size > 0) layer_output_sizes(*this, input_size);
}

int NetworkSpec::index_of(const std::string& name) const {
  for (size_t i = 0; i < layers.size(); ++i)
    if (layers[i].name == name) return static_cast<int>(i);
  throw UsageError("unknown layer '" + name + "'");
}

int NetworkSpec::count(LayerKind kind) const {
  int n = 0;
  for (const auto& l : layers) n += l.kind == kind;
  return n;
}

int NetworkSpec::output_channels() const {
  int c = input_channels;
  for (const auto& l : layers)
    if (l.kind == LayerKind::Conv) c = l.out_channels;
  return c;
}

std::string NetworkSpec::to_text() const {
  std::ostringstream os;
  os << "input " << input_size << ' ' << input_channels << '\n';
  for (const auto& l : layers) {
    os << l.name << ' ' << kind_name(l.kind) << ' ' << l.kernel << ' ' << l.stride << ' '
       << l.pad << ' ' << (l.kind == LayerKind::Conv ? l.out_channels : 0);
    if (l.kind == LayerKind::MaxPool && l.ceil_mode) os << " ceil";
    os << '\n';
  }
  return os.str();
}

NetworkSpec NetworkSpec::parse(const std::string& text) {
  NetworkSpec spec;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& why) {
    throw UsageError("spec line " + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    auto num = [&](size_t i) {
      try {
        size_t used = 0;
        const int v = std::stoi(tok[i], &used);
        if (used != tok[i].size()) fail("bad number '" + tok[i] + "'");
        return v;
      } catch (const std::logic_error&) {
        fail("bad number '" + tok[i] + "'");
      }
      return 0;
    };
    if (tok[0] == "input") {
      if (tok.size() < 2 || tok.size() > 3) fail("expected 'input <size> [channels]'");
      spec.input_size = num(1);
      if (tok.size() == 3) spec.input_channels = num(2);
      continue;
    }
    if (tok.size() < 2) fail("expected 'name kind kernel stride pad channels [ceil]'");
    LayerSpec l;
    l.name = tok[0];
    l.kind = parse_kind(tok[1]);
    if (l.kind == LayerKind::Relu && tok.size() == 2) {
      spec.layers.push_back(l);
      continue;
    }
    if (tok.size() < 6 || tok.size() > 7) fail("expected 'name kind kernel stride pad channels [ceil]'");
    l.kernel = num(2);
    l.stride = num(3);
    l.pad = num(4);
    l.out_channels = num(5);
    if (tok.size() == 7) {
      if (tok[6] != "ceil") fail("unexpected token '" + tok[6] + "'");
      l.ceil_mode = true;
    }
    if (l.kind != LayerKind::Conv) l.out_channels = 0;
    spec.layers.push_back(l);
  }
  spec.validate();
  return spec;
}

RFInfo receptive_field(const NetworkSpec& spec, const std::string& upto_layer) {
  const int last = spec.index_of(upto_layer);
  RFInfo info;
  for (int i = 0; i <= last; ++i) {
    const auto& l = spec.layers[static_cast<size_t>(i)];
    if (l.kind == LayerKind::Relu) continue;
    info.rf += (l.kernel - 1) * info.jump;
    info.jump *= l.stride;
  }
  if (spec.input_size > 0) {
    info.size = layer_output_sizes(spec, spec.input_size)[static_cast<size_t>(last)];
  }
  return info;
}

std::vector<int> layer_output_sizes(const NetworkSpec& spec, int input) {
  std::vector<int> sizes;
  sizes.reserve(spec.layers.size());
  int s = input;
  for (const auto& l : spec.layers) {
    s = layer_out(l, s);
    if (s <= 0) {
      throw DataError("layer '" + l.name + "' has non-positive output size for input " +
                      std::to_string(input));
    }
    sizes.push_back(s);
  }
  return sizes;
}

int output_size(const NetworkSpec& spec, int input) {
  if (input <= 0) throw DataError("input size must be positive");
  const auto sizes = layer_output_sizes(spec, input);
  return sizes.empty() ? input : sizes.back();
}

NetworkSpec zf_teacher_spec(const std::vector<int>& widths) {
  if (widths.size() != 5) throw UsageError("ZF backbone needs five conv widths");
  auto conv = [](std::string n, int k, int s, int p, int c) {
    return LayerSpec{std::move(n), LayerKind::Conv, k, s, p, c, false};
  };
  auto relu = [](std::string n) { return LayerSpec{std::move(n), LayerKind::Relu, 1, 1, 0, 0, false}; };
  auto pool = [](std::string n) { return LayerSpec{std::move(n), LayerKind::MaxPool, 3, 2, 1, 0, true}; };
  NetworkSpec spec;
  spec.input_size = 203;
  spec.input_channels = 3;
  spec.layers = {conv("conv1", 7, 2, 3, widths[0]), relu("relu1"), pool("pool1"),
                 conv("conv2", 5, 2, 2, widths[1]), relu("relu2"), pool("pool2"),
                 conv("conv3", 3, 1, 1, widths[2]), relu("relu3"),
                 conv("conv4", 3, 1, 1, widths[3]), relu("relu4"),
                 conv("conv5", 3, 1, 1, widths[4]), relu("relu5")};
  spec.validate();
  return spec;
}

NetworkSpec reference_teacher_spec() { return zf_teacher_spec({96, 256, 384, 384, 256}); }

NetworkSpec tiny_teacher_spec() { return zf_teacher_spec({8, 16, 24, 24, 16}); }

NetworkSpec with_score_layer(const NetworkSpec& backbone, int channels) {
  NetworkSpec s = backbone;
  s.layers.push_back(LayerSpec{kScoreLayer, LayerKind::Conv, 3, 1, 1, channels, false});
  s.validate();
  return s;
}

NetworkSpec surgery(const NetworkSpec& teacher, int student_input) {
  teacher.validate();
  if (teacher.count(LayerKind::MaxPool) < 2) {
    throw UsageError("surgery needs at least two max-pool layers");
  }
  NetworkSpec student;
  student.input_channels = teacher.input_channels;
  student.input_size = student_input;
  int dropped = 0;
  int removed_stride = 1;
  bool pending_boost = false;
  std::vector<size_t> boost_at;
  for (const auto& l : teacher.layers) {
    if (l.kind == LayerKind::MaxPool && dropped < 2) {
      ++dropped;
      removed_stride *= l.stride;
      if (dropped == 1) pending_boost = true;
      continue;
    }
    student.layers.push_back(l);
    if (pending_boost && l.kind == LayerKind::Conv) {
      boost_at.push_back(student.layers.size() - 1);
      pending_boost = false;
    }
  }
  if (boost_at.empty() || removed_stride % 2 != 0) {
    throw DataError("surgery: no conv follows the dropped pools");
  }
  student.layers[boost_at.front()].stride *= removed_stride / 2;
  student.validate();
  if (teacher.input_size > 0 &&
      output_size(student, student_input) != output_size(teacher, teacher.input_size)) {
    throw DataError("surgery: student output size at " + std::to_string(student_input) +
                    " does not match the teacher's");
  }
  return student;
}

std::vector<std::pair<std::string, std::vector<int>>> expected_weight_shapes(
    const NetworkSpec& spec) {
  std::vector<std::pair<std::string, std::vector<int>>> out;
  int c = spec.input_channels;
  for (const auto& l : spec.layers) {
    if (l.kind != LayerKind::Conv) continue;
    out.push_back({l.name + ".weight", {l.out_channels, c, l.kernel, l.kernel}});
    out.push_back({l.name + ".bias", {l.out_channels}});
    c = l.out_channels;
  }
  return out;
}

Network::Network(NetworkSpec spec, WeightSet weights)
    : spec_(std::move(spec)), weights_(std::move(weights)) {
  spec_.validate();
  for (const auto& [name, shape] : expected_weight_shapes(spec_)) {
    if (!weights_.contains(name)) throw DataError("weights missing tensor '" + name + "'");
    if (weights_.get(name).shape() != shape) {
      throw DataError("tensor '" + name + "' has shape " +
                      shape_string(weights_.get(name).shape()) + ", expected " +
                      shape_string(shape));
    }
  }
}

Network Network::random(const NetworkSpec& spec, Rng& rng) {
  WeightSet ws;
  for (const auto& [name, shape] : expected_weight_shapes(spec)) {
    Tensor t(shape);
    if (shape.size() == 4) {
      const double fan_in = static_cast<double>(shape[1]) * shape[2] * shape[3];
      rng.fill_normal(t, std::sqrt(2.0 / fan_in));
    }
    ws.set(name, std::move(t));
  }
  return Network(spec, std::move(ws));
}

Network Network::zeros(const NetworkSpec& spec) {
  WeightSet ws;
  for (const auto& [name, shape] : expected_weight_shapes(spec)) ws.set(name, Tensor(shape));
  return Network(spec, std::move(ws));
}

Tensor Network::forward(const Tensor& input) const {
  Trace trace;
  return forward(input, trace);
}

Tensor Network::forward(const Tensor& input, Trace& trace) const {
  if (input.rank() != 4 || input.dim(1) != spec_.input_channels) {
    throw UsageError("network input must be [N, " + std::to_string(spec_.input_channels) +
                     ", H, W]");
  }
  trace.inputs.clear();
  trace.pools.clear();
  Tensor x = input;
  x.drop_grad();
  for (const auto& l : spec_.layers) {
    trace.inputs.push_back(x);
    switch (l.kind) {
      case LayerKind::Conv:
        x = conv2d(x, weights_.get(l.name + ".weight"), weights_.get(l.name + ".bias"),
                   l.stride, l.pad);
        break;
      case LayerKind::Relu:
        x = relu(x);
        break;
      case LayerKind::MaxPool: {
        auto r = maxpool2d(x, l.kernel, l.stride, l.pad, l.ceil_mode);
        x = r.output;
        trace.pools.push_back(std::move(r));
        break;
      }
    }
  }
  trace.output = x;
  return x;
}

void Network::backward(const Trace& trace, const Tensor& grad_output) {
  if (trace.inputs.size() != spec_.layers.size()) throw UsageError("trace does not match network");
  Tensor g = grad_output;
  size_t pool = trace.pools.size();
  for (size_t i = spec_.layers.size(); i-- > 0;) {
    const auto& l = spec_.layers[i];
    const Tensor& in = trace.inputs[i];
    const Tensor& out = i + 1 < trace.inputs.size() ? trace.inputs[i + 1] : trace.output;
    switch (l.kind) {
      case LayerKind::Conv:
        g = conv2d_backward(in, weights_.get(l.name + ".weight"), weights_.get(l.name + ".bias"),
                            l.stride, l.pad, g, i > 0);
        break;
      case LayerKind::Relu:
        g = relu_backward(out, g);
        break;
      case LayerKind::MaxPool:
        g = maxpool2d_backward(in.shape(), trace.pools[--pool], g);
        break;
    }
  }
}

std::vector<Tensor*> Network::parameters() {
  std::vector<Tensor*> out;
  for (const auto& [name, shape] : expected_weight_shapes(spec_)) out.push_back(&weights_.get(name));
  return out;
}

void Network::zero_grad() {
  for (Tensor* p : parameters()) p->zero_grad();
}

}  // namespace rpn2t
