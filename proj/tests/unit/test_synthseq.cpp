#include <doctest.h>

#include "rpn2t/error.hpp"
#include "rpn2t/synthseq.hpp"

using namespace rpn2t;

TEST_SUITE("synthseq") {
  TEST_CASE("same seed, same pixels") {
    SynthConfig c;
    c.length = 6;
    c.motion = Motion::random_walk(2.0);
    c.appearance_drift = 0.2;
    c.distractors = 2;
    c.seed = 4;
    const auto a = generate(c), b = generate(c);
    CHECK(a.frames == b.frames);
    CHECK(a.groundtruth == b.groundtruth);
    c.seed = 5;
    CHECK_FALSE(generate(c).frames == a.frames);
  }

  TEST_CASE("static target") {
    SynthConfig c;
    c.length = 5;
    const auto s = generate(c);
    REQUIRE(s.frames.size() == 5);
    for (const auto& g : s.groundtruth) CHECK(g == s.groundtruth[0]);
    CHECK(s.groundtruth[0].w == c.target_width);
    CHECK(s.frames[1] == s.frames[0]);
  }

  TEST_CASE("linear motion moves whole pixels per frame") {
    SynthConfig c;
    c.length = 10;
    c.motion = Motion::linear(3.0, -1.0);
    const auto s = generate(c);
    for (size_t f = 1; f < s.groundtruth.size(); ++f) {
      CHECK(s.groundtruth[f].x - s.groundtruth[f - 1].x == 3.0);
      CHECK(s.groundtruth[f].y - s.groundtruth[f - 1].y == -1.0);
    }
  }

  TEST_CASE("occlusion hides the stated pixel count") {
    SynthConfig c;
    c.length = 6;
    c.seed = 8;
    const auto clear = generate(c);
    c.occlusion = Occlusion{2, 3, 0.5};
    const auto occ = generate(c);
    const int hidden = 20 * c.target_height;
    const int full = c.target_width * c.target_height;
    for (int f = 0; f < 6; ++f) {
      const bool covered = f >= 2 && f < 5;
      CHECK(occ.visible_pixels[static_cast<size_t>(f)] == (covered ? full - hidden : full));
      int differing = 0;
      for (int y = 0; y < c.frame_height; ++y)
        for (int x = 0; x < c.frame_width; ++x) {
          bool d = false;
          for (int ch = 0; ch < 3; ++ch) d = d || clear.frames[f].at(x, y, ch) != occ.frames[f].at(x, y, ch);
          differing += d;
        }
      if (covered) {
        CHECK(differing <= hidden);
        CHECK(differing >= hidden * 9 / 10);
      } else {
        CHECK(differing == 0);
      }
    }
  }

  TEST_CASE("suites") {
    CHECK(preset_suite("easy").size() == 10);
    CHECK(preset_suite("drift-prone").size() == 8);
    for (const auto& c : preset_suite("easy")) CHECK(c.length == 40);
    CHECK_THROWS_AS(preset_suite("nope"), UsageError);
  }

  TEST_CASE("invalid configurations") {
    SynthConfig c;
    c.target_width = 500;
    CHECK_THROWS_AS(generate(c), DataError);
    c = SynthConfig{};
    c.appearance_drift = 1.5;
    CHECK_THROWS_AS(generate(c), UsageError);
    c = SynthConfig{};
    c.length = 0;
    CHECK_THROWS_AS(generate(c), UsageError);
  }

  TEST_CASE("random patches") {
    SynthConfig c;
    c.length = 3;
    const auto s = generate(c);
    const auto p = random_patches(s.frames, 5, 32, 1);
    REQUIRE(p.size() == 5);
    CHECK(p[0].width == 32);
    CHECK(random_patches(s.frames, 5, 32, 1) == p);
    CHECK_THROWS_AS(random_patches({}, 5, 32, 1), DataError);
  }
}
