#include <doctest.h>

#include <cmath>
#include <limits>

#include "sht/config.hpp"
#include "sht/core.hpp"
#include "support.hpp"

using namespace sht;

namespace {

template <typename Fn>
ErrorCode code_of(Fn fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an sht::Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("image tensor enforces channels, finiteness and range") {
  CHECK_NOTHROW(ImageTensor(torch::rand({3, 8, 8}), ImageRole::HR));
  CHECK(code_of([] { ImageTensor(torch::rand({2, 8, 8}), ImageRole::HR); }) == ErrorCode::ShapeMismatch);
  CHECK(code_of([] { ImageTensor(torch::rand({3, 8, 8}) + 1.5, ImageRole::HR); }) == ErrorCode::InvalidArgument);
  auto nan = torch::rand({3, 4, 4});
  nan[0][0][0] = std::numeric_limits<float>::quiet_NaN();
  CHECK(code_of([&] { ImageTensor(nan, ImageRole::HR); }) == ErrorCode::NonFiniteActivation);
  auto c = ImageTensor::clamped(torch::full({3, 4, 4}, 2.0), ImageRole::SR);
  CHECK(c.data().max().item<double>() == 1.0);
}

TEST_CASE("hwc conversion round trips") {
  std::vector<float> hwc(2 * 3 * 3);
  for (std::size_t i = 0; i < hwc.size(); ++i) hwc[i] = static_cast<float>(i) / hwc.size();
  auto img = ImageTensor::from_hwc(hwc, 2, 3, 3, ImageRole::LR);
  CHECK(img.height() == 2);
  CHECK(img.width() == 3);
  CHECK(img.to_hwc() == hwc);
}

TEST_CASE("affine inverse and composition") {
  auto t = Affine2::similarity({10, 20}, {63.5, 63.5}, 1.7, 0.3);
  auto id = t.compose(t.inverse());
  const Point2 p{3.25, -7.5};
  auto q = id.apply(p);
  CHECK(q.x == doctest::Approx(p.x).epsilon(1e-12));
  CHECK(q.y == doctest::Approx(p.y).epsilon(1e-12));
  auto c = t.apply({10, 20});
  CHECK(c.x == doctest::Approx(63.5));
  CHECK(c.y == doctest::Approx(63.5));
}

TEST_CASE("landmark set validation and normalizers") {
  LandmarkSet lm({{0, 0}, {3, 4}}, BBox{0, 0, 10, 10}, IndexPair{0, 1});
  CHECK(lm.interocular_distance() == doctest::Approx(5.0));
  CHECK(code_of([] { LandmarkSet({{1, 1}, {1, 1}}, std::nullopt, IndexPair{0, 1}); }) == ErrorCode::DegenerateNormalizer);
  CHECK(code_of([] { LandmarkSet({{1, 1}}, BBox{0, 0, 0, 5}); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { LandmarkSet({{1, 1}}, std::nullopt, IndexPair{0, 3}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("grid rescaling keeps pixel areas aligned") {
  CHECK(rescale_coordinate(0.0, 64, 128) == doctest::Approx(0.5));
  CHECK(rescale_coordinate(-0.5, 64, 128) == doctest::Approx(-0.5));
  CHECK(rescale_coordinate(63.5, 64, 128) == doctest::Approx(127.5));
  CHECK(rescale_coordinate(17.25, 64, 64) == 17.25);
  LandmarkSet lm({{0, 0}, {63, 63}});
  auto r = lm.rescaled(64, 128).rescaled(128, 64);
  CHECK(r[1].x == doctest::Approx(63.0));
}

TEST_CASE("transformed bbox is the hull of the mapped corners") {
  LandmarkSet lm({{5, 5}}, BBox{0, 0, 10, 10});
  auto t = Affine2::similarity({5, 5}, {5, 5}, 1.0, std::acos(-1.0) / 4);
  auto b = *lm.transformed(t).bbox();
  CHECK(b.w == doctest::Approx(10 * std::sqrt(2.0)));
  CHECK(b.center().x == doctest::Approx(5.0));
}

TEST_CASE("heatmap stack validation derives visibility") {
  auto maps = torch::zeros({2, 4, 4});
  maps[0][1][1] = 1.0;
  HeatmapStack s(maps);
  CHECK(s.visible() == std::vector<bool>{true, false});
  CHECK(code_of([&] { HeatmapStack(maps * 2.0); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { HeatmapStack(maps, {true, true}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("config text round trip is exact") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    SHTConfig cfg = toy_config();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    cfg.heatmap_sigma = 0.5 + 3 * u(rng);
    cfg.gamma = {1.0, u(rng) + 1e-9, u(rng) + 1e-9};
    cfg.lambda = {u(rng) + 1e-9, u(rng) * 1e-3 + 1e-12, u(rng) + 1e-9};
    cfg.crop_margin = 1.0 + u(rng);
    cfg.seed = rng();
    cfg.non_saturating_gan = (i % 2) == 0;
    cfg.interocular = (i % 3) == 0 ? std::nullopt : std::optional<IndexPair>(IndexPair{1, 2});
    CHECK(parse_config(config_to_text(cfg)) == cfg);
  }
}

TEST_CASE("config parsing rejects unknown keys and invalid values") {
  CHECK(code_of([] { parse_config("no_such_key = 1\n"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_config("num_stacks = two\n"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_config("sr_output_size = 96\n"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_config("gamma = 0.5 0.01 0.01\n"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_config("batch_size = 7\n"); }) == ErrorCode::InvalidConfig);
  auto cfg = parse_config("# comment\nnum_stacks = 2\n\n");
  CHECK(cfg.num_stacks == 2);
}

TEST_CASE("overrides reference existing keys only") {
  SHTConfig cfg;
  apply_override(cfg, "num_landmarks=5");
  CHECK(cfg.num_landmarks == 5);
  CHECK(code_of([&] { apply_override(cfg, "bogus=1"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([&] { apply_override(cfg, "num_landmarks"); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("derived sizes") {
  SHTConfig cfg;
  CHECK(cfg.effective_degrade_size() == 16);
  CHECK(cfg.upsample_stages() == 1);
  CHECK(cfg.fptn_down_stages() == 2);
  auto ref = reference_config_256();
  CHECK(ref.effective_degrade_size() == 64);
  CHECK(ref.upsample_stages() == 2);
  CHECK(ref.fptn_down_stages() == 3);
}
