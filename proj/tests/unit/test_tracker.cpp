#include <doctest.h>

#include <cmath>

#include "rpn2t/error.hpp"
#include "rpn2t/run_config.hpp"
#include "rpn2t/synthseq.hpp"
#include "rpn2t/tracker.hpp"

using namespace rpn2t;

namespace {

TrackerConfig small_config() {
  TrackerConfig c = TrackerConfig::tiny();
  c.n_pos_init = 60;
  c.n_neg_init = 200;
  c.init_iters = 15;
  c.n_candidates = 48;
  c.per_frame_pos = 8;
  c.per_frame_neg = 24;
  c.hard_neg_pool = 64;
  c.update_iters = 4;
  c.minibatch_pos = 16;
  c.minibatch_neg = 48;
  return c;
}

std::shared_ptr<const Network> backbone() {
  static const auto net = make_backbone(BackboneConfig{});
  return net;
}

SynthSequence static_sequence(int length) {
  SynthConfig sc;
  sc.frame_width = 120;
  sc.frame_height = 120;
  sc.target_width = 36;
  sc.target_height = 36;
  sc.length = length;
  sc.seed = 21;
  return generate(sc);
}

ScoreMaps constant_maps(int G, double pa, double pq) {
  ScoreMaps m;
  m.a_logits = Tensor({1, 2, G, G});
  m.q_logits = Tensor({1, 2, G, G});
  const float la = static_cast<float>(std::log(pa / (1.0 - pa)));
  const float lq = static_cast<float>(std::log(pq / (1.0 - pq)));
  for (int y = 0; y < G; ++y) {
    for (int x = 0; x < G; ++x) {
      m.a_logits.at(0, 1, y, x) = la;
      m.q_logits.at(0, 1, y, x) = lq;
    }
  }
  return m;
}

}  // namespace

TEST_SUITE("tracker") {
  TEST_CASE("patch geometry") {
    AnchorGridConfig g;
    const Rect box = Rect::from_center(50.0, 60.0, 34.2, 20.0);
    const Rect region = patch_region(box, g);
    CHECK(region.w == doctest::Approx(34.2 * 203.0 / 171.0));
    CHECK(region.cx() == doctest::Approx(50.0));
    CHECK(region.cy() == doctest::Approx(60.0));

    Image img(64, 64, 3);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>((x * 7 + y * 13 + c) % 256);
    // Box whose crop is exactly pixels [10, 10 + 29) at out_size 29.
    const double side = 29.0 * 171.0 / 203.0;
    const Rect b = Rect::from_center(10.0 + 14.5, 10.0 + 14.5, side, side);
    const Image p = extract_patch(img, b, 29, g);
    REQUIRE(p.width == 29);
    double worst = 0.0;
    for (int y = 0; y < 29; ++y)
      for (int x = 0; x < 29; ++x)
        for (int c = 0; c < 3; ++c)
          worst = std::max(worst, std::abs(double(p.at(x, y, c)) - img.at(x + 10, y + 10, c)));
    CHECK(worst < 1e-3);
    CHECK_THROWS_AS(extract_patch(Image{}, b, 29, g), DataError);
  }

  TEST_CASE("score combination") {
    const std::vector<GridPos> all = [] {
      std::vector<GridPos> v;
      for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) v.push_back({x, y});
      return v;
    }();
    CHECK(combine_scores(constant_maps(3, 0.8, 0.6), all, all, 1.0, 10.0)[0] ==
          doctest::Approx(6.8 / 11.0).epsilon(1e-6));
    CHECK(combine_scores(constant_maps(3, 1.0 - 1e-7, 1.0 - 1e-7), all, all, 1.0, 10.0)[0] ==
          doctest::Approx(1.0).epsilon(1e-5));
    CHECK(combine_scores(constant_maps(3, 1e-7, 1e-7), all, all, 1.0, 10.0)[0] ==
          doctest::Approx(0.0).epsilon(1e-5));
    double prev = -1.0;
    for (double pa = 0.1; pa < 0.95; pa += 0.1) {
      const double s = combine_scores(constant_maps(3, pa, 0.3), all, all, 1.0, 10.0)[0];
      CHECK(s > prev);
      prev = s;
    }
  }

  TEST_CASE("top-k mean") {
    const Rect r{3.0, 4.0, 10.0, 12.0};
    const std::vector<Rect> same(5, r);
    CHECK(top_k_mean(same, {0.1, 0.2, 0.3, 0.4, 0.5}, 5) == r);
    const std::vector<Rect> boxes{{0, 0, 2, 2}, {10, 10, 4, 4}, {20, 0, 2, 2}};
    const Rect m = top_k_mean(boxes, {0.9, 0.1, 0.8}, 2);
    CHECK(m.x == doctest::Approx(10.0));
    CHECK(m.w == doctest::Approx(2.0));
  }

  TEST_CASE("sample memory evicts the oldest") {
    SampleMemory mem(3);
    for (int f = 0; f < 7; ++f) {
      auto s = std::make_shared<FrameSamples>();
      s->frame = f;
      s->pos = Tensor({1, 1, 1, 1}, static_cast<float>(f));
      s->neg = Tensor({2, 1, 1, 1}, static_cast<float>(f));
      mem.push(s);
      CHECK(mem.frames() <= 3);
    }
    CHECK(mem.items().front()->frame == 4);
    CHECK(mem.gather_pos().dim(0) == 3);
    CHECK(mem.gather_neg().dim(0) == 6);
    CHECK(mem.gather_pos()[0] == 4.0f);
  }

  TEST_CASE("tracking run: bounds, frozen backbone, determinism") {
    const auto seq = static_sequence(12);
    const auto net = backbone();
    const auto before = net->weights().encode();
    TrackerConfig cfg = small_config();
    cfg.short_memory = 3;
    cfg.long_memory = 5;
    cfg.long_interval = 2;
    Tracker t(net, cfg);
    t.initialize(seq.frames[0], seq.groundtruth[0]);
    std::vector<Rect> boxes;
    for (size_t f = 1; f < seq.frames.size(); ++f) {
      const StepResult r = t.step(seq.frames[f]);
      boxes.push_back(r.box);
      CHECK(t.short_memory().frames() <= 3);
      CHECK(t.long_memory().frames() <= 5);
      CHECK(r.box.valid());
    }
    CHECK(net->weights().encode() == before);

    Tracker again(net, cfg);
    again.initialize(seq.frames[0], seq.groundtruth[0]);
    for (size_t f = 1; f < seq.frames.size(); ++f) CHECK(again.step(seq.frames[f]).box == boxes[f - 1]);
  }

  TEST_CASE("static target stays locked") {
    const auto seq = static_sequence(20);
    const auto res = track_sequence(seq.frames, seq.groundtruth[0], backbone(), small_config());
    REQUIRE(res.boxes.size() == 20);
    CHECK(res.boxes[0] == seq.groundtruth[0]);
    double worst = 1.0, sum = 0.0;
    for (size_t f = 0; f < res.boxes.size(); ++f) {
      worst = std::min(worst, iou(res.boxes[f], seq.groundtruth[f]));
      sum += iou(res.boxes[f], seq.groundtruth[f]);
    }
    CHECK(worst >= 0.5);
    CHECK(sum / 20.0 >= 0.75);
  }

  TEST_CASE("blanked frame fails and keeps the box") {
    const auto seq = static_sequence(3);
    Tracker t(backbone(), small_config());
    t.initialize(seq.frames[0], seq.groundtruth[0]);
    const Rect kept = t.current_box();
    const double sigma = t.current_trans_sigma();
    Image blank(seq.frames[0].width, seq.frames[0].height, 3, 0.0f);
    const StepResult r = t.step(blank);
    CHECK_FALSE(r.success);
    CHECK(r.box == kept);
    CHECK(t.current_trans_sigma() == doctest::Approx(1.5 * sigma));
    t.step(blank);
    CHECK(t.current_trans_sigma() == doctest::Approx(1.5 * sigma));
  }

  TEST_CASE("single frame sequence") {
    const auto seq = static_sequence(1);
    const auto res = track_sequence(seq.frames, seq.groundtruth[0], backbone(), small_config());
    REQUIRE(res.boxes.size() == 1);
    CHECK(res.boxes[0] == seq.groundtruth[0]);
  }

  TEST_CASE("configuration validation") {
    TrackerConfig c = small_config();
    c.top_k = 0;
    CHECK_THROWS_AS(c.validate(), UsageError);
    c = small_config();
    c.pos_iou = 0.2;
    CHECK_THROWS_AS(c.validate(), UsageError);
  }
}
