#include <doctest.h>

#include <cmath>
#include <fstream>
#include <algorithm>
#include <map>
#include <sstream>
#include <string>

#include "rpn2t/error.hpp"
#include "rpn2t/losses.hpp"

using namespace rpn2t;

namespace {

struct Vector {
  double total, cls, aux;
};

std::map<std::string, Vector> load_vectors() {
  std::ifstream in(std::string(RPN2T_TEST_DATA_DIR) + "/loss_vectors.csv");
  REQUIRE(in.good());
  std::map<std::string, Vector> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::string name;
    Vector v{};
    ls >> name >> v.total >> v.cls >> v.aux;
    out[name] = v;
  }
  return out;
}

// Two-anchor fixture on a 2x2 grid: (0,0) positive, (1,0) negative, rest ignored.
LabelMap two_anchor_labels() {
  LabelMap m(2, Label::Ignore);
  m.set({0, 0}, Label::Positive);
  m.set({1, 0}, Label::Negative);
  return m;
}

Tensor logits(const std::vector<std::pair<float, float>>& bg_fg) {
  Tensor t({1, 2, 2, 2});
  for (int i = 0; i < 4; ++i) {
    t.at(0, 0, i / 2, i % 2) = bg_fg[static_cast<size_t>(i)].first;
    t.at(0, 1, i / 2, i % 2) = bg_fg[static_cast<size_t>(i)].second;
  }
  return t;
}

Tensor randn(const std::vector<int>& shape, Rng& rng) {
  Tensor t(shape);
  rng.fill_normal(t, 1.0);
  return t;
}

Tensor two_anchor_a() { return logits({{0.2f, 1.5f}, {0.3f, -0.4f}, {-2.0f, 7.0f}, {5.0f, -3.0f}}); }

}  // namespace

TEST_SUITE("losses") {
  TEST_CASE("hand-evaluated vectors: rpn") {
    const auto v = load_vectors().at("rpn_two_anchor");
    ScoreMaps maps;
    maps.a_logits = two_anchor_a();
    Tensor reg({1, 4, 2, 2});
    const float pred[4] = {0.1f, -0.2f, 0.5f, 2.0f};
    for (int k = 0; k < 4; ++k) reg.at(0, k, 0, 0) = pred[k];
    maps.reg = reg;
    BoxDeltaMap targets(2);
    targets.cells[0] = BoxDelta{0.0, 0.3, -0.8, 0.4};
    const LabelMap labels = two_anchor_labels();
    const auto r = rpn_loss<float>(maps, std::span(&labels, 1), std::span(&targets, 1), RpnConfig{});
    CHECK(r.value == doctest::Approx(v.total).epsilon(1e-6));
    CHECK(r.cls == doctest::Approx(v.cls).epsilon(1e-6));
    CHECK(r.aux == doctest::Approx(v.aux).epsilon(1e-6));
  }

  TEST_CASE("hand-evaluated vectors: rpn2t") {
    const auto v = load_vectors().at("rpn2t_two_anchor");
    ScoreMaps maps;
    maps.a_logits = two_anchor_a();
    maps.q_logits = logits({{0.0f, 1.0f}, {0.5f, 0.5f}, {2.0f, -1.0f}, {-1.0f, 0.0f}});
    const LabelMap la = two_anchor_labels();
    const LabelMap lq(2, Label::Positive);
    const auto r = rpn2t_loss<float>(maps, std::span(&la, 1), std::span(&lq, 1), Rpn2tConfig{});
    CHECK(r.value == doctest::Approx(v.total).epsilon(1e-6));
    CHECK(r.cls == doctest::Approx(v.cls).epsilon(1e-6));
    CHECK(r.aux == doctest::Approx(v.aux).epsilon(1e-6));
  }

  TEST_CASE("hand-evaluated vectors: zero logits on the full grid") {
    const auto v = load_vectors().at("rpn2t_uniform_11ln2");
    AnchorGridConfig g;
    const Rect gt = canonical_target(g);
    const LabelMap la = label_map(SampleClass::Positive, central_block(g), g);
    const LabelMap lq =
        label_map(SampleClass::Positive, match_anchors(gt, g, MatchScheme::all_positions()), g);
    BasicScoreMaps<double> maps;
    maps.a_logits = BasicTensor<double>({1, 2, 14, 14});
    maps.q_logits = BasicTensor<double>({1, 2, 14, 14});
    const auto r = rpn2t_loss<double>(maps, std::span(&la, 1), std::span(&lq, 1), Rpn2tConfig{});
    CHECK(r.value == doctest::Approx(v.total).epsilon(1e-12));
    CHECK(r.value == doctest::Approx(11.0 * std::log(2.0)).epsilon(1e-12));
  }

  TEST_CASE("rpn2t is linear in alpha and beta") {
    Rng rng(9);
    ScoreMaps maps;
    maps.a_logits = randn({2, 2, 3, 3}, rng);
    maps.q_logits = randn({2, 2, 3, 3}, rng);
    LabelMap la(3, Label::Negative), lq(3, Label::Positive);
    la.set({1, 1}, Label::Positive);
    la.set({2, 0}, Label::Ignore);
    for (const double alpha : {0.0, 0.5, 2.0}) {
      for (const double beta : {0.0, 1.0, 10.0}) {
        if (alpha == 0.0 && beta == 0.0) continue;
        Rpn2tConfig cfg;
        cfg.alpha = alpha;
        cfg.beta = beta;
        const auto r = rpn2t_loss<double>(
            BasicScoreMaps<double>{maps.a_logits.cast<double>(), maps.q_logits.cast<double>(), {}},
            std::span(&la, 1), std::span(&lq, 1), cfg);
        CHECK(r.value == doctest::Approx(alpha * r.cls + beta * r.aux).epsilon(1e-12));
      }
    }
    Rpn2tConfig none;
    none.alpha = 0.0;
    none.beta = 0.0;
    CHECK_THROWS_AS(none.validate(), UsageError);
  }

  TEST_CASE("beta zero with all-positions a reduces to plain cross entropy") {
    Rng rng(10);
    ScoreMaps maps;
    maps.a_logits = randn({1, 2, 4, 4}, rng);
    maps.q_logits = randn({1, 2, 4, 4}, rng);
    const LabelMap pos(4, Label::Positive);
    Rpn2tConfig cfg;
    cfg.beta = 0.0;
    const auto r = rpn2t_loss<float>(maps, std::span(&pos, 1), std::span(&pos, 1), cfg);
    double ce = 0.0;
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) {
        const double bg = maps.a_logits.at(0, 0, y, x), fg = maps.a_logits.at(0, 1, y, x);
        ce += std::log(std::exp(bg) + std::exp(fg)) - fg;
      }
    }
    CHECK(r.value == doctest::Approx(ce / 16.0).epsilon(1e-5));
    for (size_t i = 0; i < r.grad.q_logits.numel(); ++i) CHECK(r.grad.q_logits[i] == 0.0f);
  }

  TEST_CASE("ignored cells carry no gradient") {
    ScoreMaps maps;
    maps.a_logits = two_anchor_a();
    maps.q_logits = two_anchor_a();
    const LabelMap la = two_anchor_labels();
    const auto r = rpn2t_loss<float>(maps, std::span(&la, 1), std::span(&la, 1), Rpn2tConfig{});
    for (int c = 0; c < 2; ++c) {
      for (const auto [x, y] : {std::pair{0, 1}, std::pair{1, 1}}) {
        CHECK(r.grad.a_logits.at(0, c, y, x) == 0.0f);
        CHECK(r.grad.q_logits.at(0, c, y, x) == 0.0f);
      }
    }
    CHECK(r.grad.a_logits.at(0, 1, 0, 0) < 0.0f);
    CHECK(r.grad.a_logits.at(0, 1, 0, 1) > 0.0f);
  }

  TEST_CASE("one empty branch contributes nothing, two is an error") {
    ScoreMaps maps;
    maps.a_logits = two_anchor_a();
    maps.q_logits = two_anchor_a();
    const LabelMap ignore(2, Label::Ignore), la = two_anchor_labels();
    const auto r = rpn2t_loss<float>(maps, std::span(&la, 1), std::span(&ignore, 1), Rpn2tConfig{});
    CHECK(r.aux == 0.0f);
    CHECK(r.value == doctest::Approx(r.cls));
    CHECK_THROWS_WITH_AS(
        rpn2t_loss<float>(maps, std::span(&ignore, 1), std::span(&ignore, 1), Rpn2tConfig{}),
        "empty loss support", UsageError);
  }

  TEST_CASE("box deltas") {
    const Rect anchor = Rect::from_center(101.0, 101.0, 171.0, 171.0);
    const Rect shifted = Rect::from_center(117.0, 101.0, 171.0, 171.0);
    const BoxDelta d = box_delta(anchor, shifted);
    CHECK(d.tx == doctest::Approx(16.0 / 171.0));
    CHECK(d.ty == 0.0);
    CHECK(d.tw == 0.0);
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
      const Rect a{rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(5, 80), rng.uniform(5, 80)};
      const Rect g{rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(5, 80), rng.uniform(5, 80)};
      const Rect back = apply_delta(a, box_delta(a, g));
      CHECK(back.x == doctest::Approx(g.x).epsilon(1e-9));
      CHECK(back.y == doctest::Approx(g.y).epsilon(1e-9));
      CHECK(back.w == doctest::Approx(g.w).epsilon(1e-9));
      CHECK(back.h == doctest::Approx(g.h).epsilon(1e-9));
    }
  }

  TEST_CASE("rpn regression edge cases") {
    ScoreMaps maps;
    maps.a_logits = two_anchor_a();
    maps.reg = Tensor({1, 4, 2, 2}, 3.0f);
    const LabelMap la = two_anchor_labels();
    BoxDeltaMap missing(2);
    CHECK_THROWS_AS(rpn_loss<float>(maps, std::span(&la, 1), std::span(&missing, 1), RpnConfig{}),
                    DataError);
    LabelMap neg(2, Label::Negative);
    const auto r = rpn_loss<float>(maps, std::span(&neg, 1), std::span(&missing, 1), RpnConfig{});
    CHECK(r.aux == 0.0f);
    for (size_t i = 0; i < r.grad.reg->numel(); ++i) CHECK((*r.grad.reg)[i] == 0.0f);
    ScoreMaps noreg;
    noreg.a_logits = two_anchor_a();
    CHECK_THROWS_AS(rpn_loss<float>(noreg, std::span(&neg, 1), std::span(&missing, 1), RpnConfig{}),
                    UsageError);
  }
}
