#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sht/metrics.hpp"

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

LandmarkSet random_set(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(10.0, 90.0);
  std::vector<Point2> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng)};
  return LandmarkSet(pts, BBox{5, 8, 80 + u(rng) * 0.1, 70 + u(rng) * 0.1}, IndexPair{0, 1});
}

}  // namespace

TEST_CASE("nme examples") {
  LandmarkSet gt({{0, 0}, {50, 0}}, BBox{0, 0, 60, 80}, IndexPair{0, 1});
  LandmarkSet pred({{3, 4}, {53, 4}});
  CHECK(nme(pred, gt, NormalizationKind::io) == 0.10);
  CHECK(nme(pred, gt, NormalizationKind::wid) == doctest::Approx(5.0 / 60));
  CHECK(nme(pred, gt, NormalizationKind::box) == doctest::Approx(5.0 / std::sqrt(60.0 * 80)));
  CHECK(nme(pred, gt, NormalizationKind::diag) == doctest::Approx(5.0 / 100));
  for (auto k : {NormalizationKind::io, NormalizationKind::box, NormalizationKind::diag, NormalizationKind::wid}) {
    CHECK(nme(gt, gt, k) == 0.0);
    CHECK(parse_normalization(to_string(k)) == k);
  }
  CHECK(code_of([&] { nme(LandmarkSet({{1, 1}}), gt, NormalizationKind::io); }) == ErrorCode::LandmarkCountMismatch);
  CHECK(code_of([&] { nme(pred, LandmarkSet({{0, 0}, {1, 1}}), NormalizationKind::box); }) ==
        ErrorCode::DegenerateNormalizer);
}

TEST_CASE("nme is invariant to joint translation and scaling") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  std::uniform_real_distribution<double> s(0.2, 5.0);
  for (int i = 0; i < 100; ++i) {
    auto gt = random_set(rng, 5);
    auto pred = random_set(rng, 5);
    const Point2 off{u(rng), u(rng)};
    const double k = s(rng);
    for (auto kind : {NormalizationKind::io, NormalizationKind::box, NormalizationKind::diag, NormalizationKind::wid}) {
      const double base = nme(pred, gt, kind);
      CHECK(nme(pred.scaled(1.0, off), gt.scaled(1.0, off), kind) == doctest::Approx(base).epsilon(1e-9));
      CHECK(nme(pred.scaled(k), gt.scaled(k), kind) == doctest::Approx(base).epsilon(1e-9));
    }
  }
}

TEST_CASE("ced auc examples") {
  CHECK(ced_auc({0.0, 0.0, 0.0}, 0.07) == 1.0);
  CHECK(ced_auc({0.1, 0.2}, 0.1) == 0.0);
  CHECK(ced_auc({0.02, 0.04, 0.06, 0.08}, 0.10) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(code_of([] { ced_auc({}, 0.1); }) == ErrorCode::EmptyErrorList);
}

TEST_CASE("ced auc agrees with numerical integration and is monotone") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(0.0, 0.15);
  std::uniform_real_distribution<double> shrink(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> e(1 + rng() % 20);
    for (auto& v : e) v = u(rng);
    const double a = ced_auc(e, 0.1);
    CHECK(a == doctest::Approx(oracle::ced_auc_numeric(e, 0.1)).epsilon(1e-4));
    auto better = e;
    for (auto& v : better) v *= shrink(rng);
    CHECK(ced_auc(better, 0.1) >= a - 1e-15);
  }
}

TEST_CASE("failure rate examples") {
  CHECK(failure_rate({0.01, 0.02}, 0.1) == 0.0);
  CHECK(failure_rate({0.05, 0.15}, 0.1) == 0.5);
  CHECK(failure_rate({0.1}, 0.1) == 0.0);
  auto curve = ced_curve({0.05, 0.15}, 0.2, 5);
  REQUIRE(curve.size() == 5);
  CHECK(curve.front().second == 0.0);
  CHECK(curve.back().second == 1.0);
}

TEST_CASE("psnr examples") {
  torch::manual_seed(23);
  ImageTensor a(torch::rand({3, 16, 16}) * 0.5, ImageRole::HR);
  CHECK(psnr_y(a, a) == kInfinitePsnr);
  // Luma weights sum to 219/255, so this channel shift moves luma by exactly 16/255.
  const double shift = 16.0 / 219.0;
  ImageTensor b(a.data().to(torch::kFloat64) + shift, ImageRole::HR);
  CHECK(psnr_y(a, b) == doctest::Approx(10 * std::log10(255.0 * 255.0 / 256.0)).epsilon(1e-9));
  CHECK(psnr_y(a, b) == doctest::Approx(24.0484).epsilon(1e-5));
  CHECK(code_of([&] { psnr_y(a, ImageTensor(torch::rand({3, 8, 8}), ImageRole::HR)); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("psnr and ssim agree with scalar oracles") {
  torch::manual_seed(24);
  for (int i = 0; i < 10; ++i) {
    auto x = torch::rand({3, 20, 18}, torch::kFloat64);
    auto y = (x + 0.1 * torch::randn({3, 20, 18}, torch::kFloat64)).clamp(0, 1);
    ImageTensor a(x, ImageRole::HR), b(y, ImageRole::SR);
    CHECK(psnr_y(a, b) == doctest::Approx(oracle::psnr_y(x, y)).epsilon(1e-9));
    CHECK(ssim_y(a, b) == doctest::Approx(oracle::ssim_y(x, y)).epsilon(1e-9));
    CHECK(ssim_y(a, b) == doctest::Approx(ssim_y(b, a)).epsilon(1e-12));
  }
}

TEST_CASE("ssim examples") {
  torch::manual_seed(25);
  ImageTensor noise(torch::rand({3, 64, 64}), ImageRole::HR);
  ImageTensor flat(torch::full({3, 64, 64}, 0.5), ImageRole::HR);
  CHECK(std::abs(ssim_y(noise, noise) - 1.0) < 1e-9);
  CHECK(ssim_y(noise, flat) < 0.1);
  CHECK(code_of([] {
          ImageTensor s(torch::rand({3, 8, 8}), ImageRole::HR);
          ssim_y(s, s);
        }) == ErrorCode::ImageTooSmall);
}

TEST_CASE("report json round trip including infinite psnr") {
  std::vector<EvalRecord> recs{{"a.png", 0.05, kInfinitePsnr, 1.0}, {"b.png", 0.15, 30.0, 0.9}};
  auto r = summarize(recs, NormalizationKind::box, 0.1, 0.1);
  CHECK(r.mean_nme == doctest::Approx(0.1));
  CHECK(r.fr == 0.5);
  CHECK(*r.mean_psnr == kInfinitePsnr);
  auto back = report_from_json(report_to_json(r));
  CHECK(back.kind == NormalizationKind::box);
  CHECK(back.records.size() == 2);
  CHECK(*back.records[0].psnr == kInfinitePsnr);
  CHECK(back.auc == doctest::Approx(r.auc));
  CHECK(*back.mean_ssim == doctest::Approx(0.95));
}
