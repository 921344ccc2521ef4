#include <doctest.h>

#include <limits>

#include "sht/dhln.hpp"
#include "sht/fptn.hpp"
#include "sht/heatmap.hpp"
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

bool all_finite(const torch::Tensor& t) { return torch::isfinite(t).all().item<bool>(); }

}  // namespace

TEST_CASE("hourglass unit preserves the pose feature shape") {
  torch::manual_seed(0);
  HourglassUnit unit(4, 256, 2);
  unit->eval();
  torch::NoGradGuard guard;
  auto y = unit->forward(torch::randn({1, 256, 64, 64}));
  CHECK(y.sizes() == torch::IntArrayRef({1, 256, 64, 64}));
  CHECK(all_finite(y));
  unit->zero_final_layer();
  CHECK(unit->forward(torch::zeros({1, 256, 64, 64})).abs().max().item<double>() == 0.0);
}

TEST_CASE("sr module preserves shape and is the identity when zeroed") {
  torch::manual_seed(1);
  SRModule sr(64, 4);
  torch::NoGradGuard guard;
  auto q = torch::randn({1, 64, 64, 64});
  auto y = sr->forward(q);
  CHECK(y.sizes() == q.sizes());
  CHECK(all_finite(y));
  sr->zero_residuals();
  CHECK(torch::equal(sr->forward(q), q));
}

TEST_CASE("fublock1 examples") {
  torch::manual_seed(2);
  FuBlock1 fu(16, 8);
  torch::NoGradGuard guard;
  auto p = torch::randn({2, 16, 8, 8});
  CHECK(fu->forward(p, torch::zeros({2, 8, 8, 8})).abs().max().item<double>() == 0.0);
  auto q = torch::rand({2, 8, 8, 8}) + 0.1;
  auto y = fu->forward(p, q);
  CHECK((y > q).all().item<bool>());
  CHECK((y < 2 * q).all().item<bool>());
  fu->zero_attention();
  CHECK(torch::equal(fu->forward(p, q), 1.5 * q));
}

TEST_CASE("fublock2 is the identity with a zeroed convolution") {
  torch::manual_seed(3);
  FuBlock2 fu(16, 8, 3);
  torch::NoGradGuard guard;
  auto p = torch::randn({2, 16, 8, 8});
  auto q = torch::randn({2, 8, 8, 8});
  auto y = fu->forward(p, q);
  CHECK(y.sizes() == p.sizes());
  CHECK(all_finite(y));
  fu->zero_conv();
  CHECK(torch::equal(fu->forward(p, q), p));
}

TEST_CASE("dhln output shapes for both resolution modes") {
  torch::manual_seed(4);
  auto cfg = testing::tiny_config();
  for (int out : {128, 256}) {
    cfg.sr_output_size = out;
    DHLN net(validate_config(cfg));
    auto o = dhln_forward(net, ImageTensor(torch::rand({3, 64, 64}), ImageRole::LR));
    REQUIRE(o.heatmaps.size() == 2);
    for (const auto& h : o.heatmaps) CHECK(h.sizes() == torch::IntArrayRef({1, 3, 64, 64}));
    CHECK(o.sr_image.sizes() == torch::IntArrayRef({1, 3, out, out}));
    CHECK(o.sr_image.min().item<double>() >= 0.0);
    CHECK(o.sr_image.max().item<double>() <= 1.0);
  }
}

TEST_CASE("dhln inference is deterministic and restores training mode") {
  torch::manual_seed(5);
  DHLN net(testing::tiny_config());
  net->train();
  ImageTensor x(torch::rand({3, 64, 64}), ImageRole::LR);
  auto a = dhln_forward(net, x);
  auto b = dhln_forward(net, x);
  CHECK(net->is_training());
  CHECK(torch::equal(a.sr_image, b.sr_image));
  CHECK(torch::equal(a.heatmaps.back(), b.heatmaps.back()));
}

TEST_CASE("dhln rejects wrong input sizes and non-finite activations") {
  torch::manual_seed(6);
  DHLN net(testing::tiny_config());
  CHECK(code_of([&] { dhln_forward(net, ImageTensor(torch::rand({3, 32, 32}), ImageRole::LR)); }) ==
        ErrorCode::ShapeMismatch);
  {
    torch::NoGradGuard guard;
    net->heatmap_head(1)->weight.fill_(std::numeric_limits<float>::quiet_NaN());
  }
  CHECK(code_of([&] { dhln_forward(net, ImageTensor(torch::rand({3, 64, 64}), ImageRole::LR)); }) ==
        ErrorCode::NonFiniteActivation);
}

TEST_CASE("every stack's heatmap head receives gradient") {
  torch::manual_seed(7);
  DHLN net(testing::tiny_config());
  auto o = net->forward(torch::rand({2, 3, 64, 64}));
  torch::Tensor loss = o.sr_image.mean();
  for (auto& h : o.heatmaps) loss = loss + h.pow(2).mean();
  loss.backward();
  for (int t = 0; t < 2; ++t) {
    CHECK(net->heatmap_head(t)->weight.grad().abs().sum().item<double>() > 0.0);
  }
}

TEST_CASE("zero-initialized fusion leaves sr features to fublock1 only") {
  torch::manual_seed(8);
  DHLN net(testing::tiny_config());
  net->zero_init_fusion_and_sr();
  net->eval();
  torch::NoGradGuard guard;
  auto tr = net->trace(torch::rand({1, 3, 64, 64}));
  for (std::size_t t = 0; t < tr.fused.size(); ++t) {
    CHECK(torch::equal(tr.fused[t].pose, tr.hourglass_out[t].pose));
  }
}

TEST_CASE("generator output shape, range and determinism") {
  torch::manual_seed(9);
  auto cfg = testing::tiny_config();
  FPTN fptn(cfg);
  ImageTensor i_con(torch::rand({3, 128, 128}), ImageRole::SR);
  auto h = render_heatmaps(LandmarkSet({{20, 20}, {40, 20}, {30, 40}}), 64, 64, 1.5);
  auto y = generator_forward(fptn.generator, {i_con, h, h});
  CHECK(y.height() == 128);
  CHECK(y.role() == ImageRole::Generated);
  auto y2 = generator_forward(fptn.generator, {i_con, h, h});
  CHECK(torch::equal(y.data(), y2.data()));
  CHECK(code_of([&] {
          generator_forward(fptn.generator, {ImageTensor(torch::rand({3, 64, 64}), ImageRole::SR), h, h});
        }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("zeroed transfer residuals pass image features through") {
  torch::manual_seed(10);
  auto cfg = testing::tiny_config();
  Generator g(cfg);
  g->zero_transfer_residuals();
  g->eval();
  torch::NoGradGuard guard;
  auto [img, pose] = g->encode(torch::rand({2, 3, 128, 128}), torch::rand({2, 3, 64, 64}), torch::rand({2, 3, 64, 64}));
  CHECK(torch::equal(g->transfer(img, pose), img));
}

TEST_CASE("discriminator scores lie in the open unit interval") {
  torch::manual_seed(11);
  auto cfg = testing::tiny_config();
  FPTN fptn(cfg);
  ImageTensor a(torch::rand({3, 128, 128}), ImageRole::HR);
  ImageTensor b(torch::rand({3, 128, 128}), ImageRole::HR);
  auto h = render_heatmaps(LandmarkSet({{20, 20}, {40, 20}, {30, 40}}), 64, 64, 1.5);
  const double ab = discriminator_appearance(fptn.d_appearance, a, b);
  const double ba = discriminator_appearance(fptn.d_appearance, b, a);
  CHECK(ab > 0.0);
  CHECK(ab < 1.0);
  CHECK(ab != ba);
  const double s = discriminator_shape(fptn.d_shape, h, a);
  CHECK(s > 0.0);
  CHECK(s < 1.0);
  CHECK(s == discriminator_shape(fptn.d_shape, h, a));
  CHECK(code_of([&] { discriminator_appearance(fptn.d_appearance, a, ImageTensor(torch::rand({3, 64, 64}), ImageRole::HR)); }) ==
        ErrorCode::ShapeMismatch);
}

TEST_CASE("score clamp") {
  CHECK(clamp_score(1.0) == 1.0 - 1e-7);
  CHECK(clamp_score(0.0) == 1e-7);
  auto s = squash_scores(torch::tensor({100.0, -100.0, 0.0}));
  CHECK(s[0].item<double>() == 1.0 - 1e-7);
  CHECK(s[1].item<double>() == 1e-7);
  CHECK(s[2].item<double>() == 0.5);
}

TEST_CASE("shape discriminator resizes heatmaps bilinearly") {
  auto maps = torch::rand({1, 3, 64, 64});
  auto up = upsample_heatmaps(maps, 128);
  CHECK(up.sizes() == torch::IntArrayRef({1, 3, 128, 128}));
  // Half-pixel aligned bilinear: output (1,1) averages input (0,0)..(1,1) with weights 3/4 and 1/4.
  const double expect = 0.5625 * maps[0][0][0][0].item<double>() + 0.1875 * maps[0][0][0][1].item<double>() +
                        0.1875 * maps[0][0][1][0].item<double>() + 0.0625 * maps[0][0][1][1].item<double>();
  CHECK(up[0][0][1][1].item<double>() == doctest::Approx(expect).epsilon(1e-6));
}
