#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "sht/heatmap.hpp"
#include "sht/trainer.hpp"
#include "support.hpp"

using namespace sht;
namespace fs = std::filesystem;

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

const std::vector<AnnotatedFace>& toy_faces() {
  static const auto faces = generate_toy_dataset(16, 128, 3, ToyRanges{}, 77);
  return faces;
}

TrainingData toy_data() {
  TrainingData d;
  d.labeled = toy_faces();
  d.videos = generate_toy_videos(2, 4, 128, 3, ToyRanges{}, 5);
  return d;
}

bool same_params(torch::nn::Module& a, torch::nn::Module& b) {
  auto pa = a.named_parameters();
  auto pb = b.named_parameters();
  for (const auto& item : pa) {
    if (!torch::equal(item.value(), pb[item.key()])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("augmentation draws stay inside their clamps") {
  auto cfg = testing::tiny_config();
  Rng rng(1);
  double max_angle = 0.0;
  for (int i = 0; i < 100000; ++i) {
    auto a = sample_augmentation(cfg, rng);
    CHECK_LE(std::abs(a.angle_deg), 30.0);
    CHECK_GE(a.scale, 0.8);
    CHECK_LE(a.scale, 1.2);
    max_angle = std::max(max_angle, std::abs(a.angle_deg));
  }
  CHECK(max_angle == 30.0);
}

TEST_CASE("crop transform agrees with an explicit similarity") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const BBox box{10 + 50 * u(rng), 5 + 50 * u(rng), 20 + 60 * u(rng), 20 + 60 * u(rng)};
    const Augmentation aug{60 * u(rng) - 30, 0.8 + 0.4 * u(rng)};
    const auto t = crop_transform(box, aug, 128, 1.4);
    const Point2 p{200 * u(rng), 200 * u(rng)};
    const double s = 128.0 / (std::max(box.w, box.h) * 1.4 * aug.scale);
    const double th = aug.angle_deg * std::numbers::pi / 180.0;
    const double dx = p.x - box.center().x, dy = p.y - box.center().y;
    const Point2 expect{63.5 + s * (std::cos(th) * dx - std::sin(th) * dy),
                        63.5 + s * (std::sin(th) * dx + std::cos(th) * dy)};
    const auto got = t.apply(p);
    CHECK(got.x == doctest::Approx(expect.x).epsilon(1e-12));
    CHECK(got.y == doctest::Approx(expect.y).epsilon(1e-12));
  }
}

TEST_CASE("augmented views keep image, landmarks and heatmaps consistent") {
  auto cfg = testing::tiny_config();
  cfg.interocular = IndexPair{0, 1};
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto spec = sample_toy_face(128, 3, ToyRanges{}, 500 + seed);
    spec.noise_amplitude = 0.0;
    AnnotatedFace face;
    face.name = "f";
    face.image = render_toy_face(spec);
    face.landmarks = LandmarkSet(spec.features, toy_face_bbox(spec));
    Rng rng(seed);
    auto view = sample_view(face, *face.image, cfg, rng);
    auto t = crop_transform(*face.landmarks.bbox(), view.augmentation, 128, cfg.crop_margin);
    auto grid = to_heatmap_grid(view.landmarks, cfg);
    auto decoded = decode_heatmaps(view.heatmaps).landmarks;
    auto lum = view.hr.data().to(torch::kFloat64).mean(0);
    for (std::size_t l = 0; l < 3; ++l) {
      const auto expect = t.apply(face.landmarks[l]);
      CHECK(view.landmarks[l].x == doctest::Approx(expect.x).epsilon(1e-9));
      CHECK(std::abs(decoded[l].x - grid[l].x) <= 0.5);
      CHECK(std::abs(decoded[l].y - grid[l].y) <= 0.5);
      const int x = static_cast<int>(std::lround(view.landmarks[l].x));
      const int y = static_cast<int>(std::lround(view.landmarks[l].y));
      if (x < 4 || y < 4 || x > 123 || y > 123) continue;
      // The feature blob sits under the transformed landmark.
      const double c = lum[y][x].item<double>();
      const double ring = (lum[y][x + 4] + lum[y][x - 4] + lum[y + 4][x] + lum[y - 4][x]).item<double>() / 4;
      CHECK(c < ring);
    }
  }
}

TEST_CASE("image pair sampling is reproducible and labeled") {
  auto cfg = testing::tiny_config();
  const auto& face = toy_faces()[0];
  Rng r1(9), r2(9);
  auto a = sample_image_pair(face, cfg, r1);
  auto b = sample_image_pair(face, cfg, r2);
  CHECK(torch::equal(a.img_j.data(), b.img_j.data()));
  CHECK(torch::equal(a.hr_k.data(), b.hr_k.data()));
  CHECK(torch::equal(a.gt_heatmaps_k->maps(), b.gt_heatmaps_k->maps()));
  CHECK(a.labeled);
  CHECK(a.img_j.height() == 64);
  CHECK(a.hr_j.height() == 128);
  CHECK(a.gt_heatmaps_j->height() == 64);
  auto s = a.swapped();
  CHECK(torch::equal(s.img_j.data(), a.img_k.data()));
  CHECK(torch::equal(s.gt_heatmaps_k->maps(), a.gt_heatmaps_j->maps()));
}

TEST_CASE("landmarks far outside the crop exhaust the resampling budget") {
  auto cfg = testing::tiny_config();
  AnnotatedFace face = toy_faces()[0];
  face.landmarks = LandmarkSet({{2, 2}, {125, 2}, {64, 125}}, BBox{60, 60, 8, 8});
  Rng rng(1);
  CHECK(code_of([&] { sample_image_pair(face, cfg, rng); }) == ErrorCode::LandmarkOutOfFrame);
}

TEST_CASE("video pairs draw distinct frames and are unlabeled") {
  auto cfg = testing::tiny_config();
  auto videos = generate_toy_videos(1, 2, 128, 3, ToyRanges{}, 8);
  auto five = generate_toy_videos(1, 5, 128, 3, ToyRanges{}, 8);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    auto p = sample_video_pair(videos[0], cfg, rng);
    CHECK_FALSE(p.labeled);
    CHECK_FALSE(p.gt_heatmaps_j.has_value());
    CHECK(p.provenance == Provenance::VideoFrames);
    const bool forward = torch::equal(p.hr_j.data(), videos[0].frame(0).data()) &&
                         torch::equal(p.hr_k.data(), videos[0].frame(1).data());
    const bool backward = torch::equal(p.hr_j.data(), videos[0].frame(1).data()) &&
                          torch::equal(p.hr_k.data(), videos[0].frame(0).data());
    CHECK((forward || backward));
    auto q = sample_video_pair(five[0], cfg, rng);
    CHECK_FALSE(torch::equal(q.hr_j.data(), q.hr_k.data()));
  }
  VideoSequence single{"one", {}, {videos[0].frame(0)}};
  CHECK(code_of([&] { sample_video_pair(single, cfg, rng); }) == ErrorCode::TooFewFrames);
}

TEST_CASE("collate places j members before k members") {
  auto cfg = testing::tiny_config();
  Rng rng(4);
  std::vector<TrainingPair> pairs{sample_image_pair(toy_faces()[0], cfg, rng),
                                  sample_video_pair(generate_toy_videos(1, 3, 128, 3, ToyRanges{}, 1)[0], cfg, rng)};
  auto b = collate(pairs, cfg);
  CHECK(b.pairs == 2);
  CHECK(b.lr.sizes() == torch::IntArrayRef({4, 3, 64, 64}));
  CHECK(torch::equal(b.lr[1], pairs[1].img_j.data().to(torch::kFloat32)));
  CHECK(torch::equal(b.lr[2], pairs[0].img_k.data().to(torch::kFloat32)));
  CHECK(b.labeled[0].item<bool>());
  CHECK_FALSE(b.labeled[3].item<bool>());
  CHECK(b.heatmaps[3].abs().sum().item<double>() == 0.0);

  auto t = transfer_from_ground_truth(b);
  CHECK(torch::equal(t.h_con[0], b.heatmaps[0]));
  CHECK(torch::equal(t.h_tar[0], b.heatmaps[2]));
  CHECK(torch::equal(t.i_tar[2], b.hr[0]));
}

TEST_CASE("phase order is enforced") {
  auto cfg = testing::tiny_config();
  Trainer fresh(cfg);
  CHECK(code_of([&] { fresh.begin_phase(Phase::finetune_sht, 5); }) == ErrorCode::PhaseViolation);
  CHECK(code_of([&] { fresh.begin_phase(Phase::weak_finetune, 5); }) == ErrorCode::PhaseViolation);

  Trainer t(cfg);
  t.begin_phase(Phase::pretrain_fptn, 5);
  CHECK(code_of([&] { t.begin_phase(Phase::pretrain_dhln, 5); }) == ErrorCode::PhaseViolation);
  CHECK(code_of([&] { t.step_dhln({}); }) == ErrorCode::PhaseViolation);

  for (auto p : {Phase::pretrain_dhln, Phase::pretrain_fptn, Phase::finetune_sht, Phase::weak_finetune}) {
    CHECK(parse_phase(to_string(p)) == p);
  }
}

TEST_CASE("full schedule runs in declared order") {
  auto cfg = testing::tiny_config();
  Trainer t(cfg);
  auto data = toy_data();
  t.run_phase(Phase::pretrain_dhln, data, 2);
  t.run_phase(Phase::pretrain_fptn, data, 2);
  t.run_phase(Phase::finetune_sht, data, 2);
  t.run_phase(Phase::weak_finetune, data, 2);
  CHECK(t.state().step == 8);
  CHECK(t.state().history.size() == 8);
  CHECK(t.state().history.back().phase == Phase::weak_finetune);
  CHECK(t.state().history.back().diagnostics.at("labeled_fraction") == 0.5);
  for (const auto& r : t.state().history) CHECK_FALSE(r.skipped);
  CHECK(code_of([&] { t.begin_phase(Phase::finetune_sht, 1); }) == ErrorCode::PhaseViolation);
}

TEST_CASE("identity pairs in fptn pretraining share the target") {
  auto cfg = testing::tiny_config();
  cfg.identity_pair_fraction = 1.0;
  Trainer t(cfg);
  t.begin_phase(Phase::pretrain_fptn, 1);
  for (const auto& p : t.sample_batch(toy_data())) {
    CHECK(torch::equal(p.hr_j.data(), p.hr_k.data()));
    CHECK(torch::equal(p.gt_heatmaps_j->maps(), p.gt_heatmaps_k->maps()));
  }
}

TEST_CASE("learning rate schedule") {
  Trainer t(testing::tiny_config());
  t.begin_phase(Phase::pretrain_dhln, 100);
  t.state().phase_step = 59;
  CHECK(t.learning_rate_factor() == 1.0);
  t.state().phase_step = 60;
  CHECK(t.learning_rate_factor() == 0.5);
  t.state().phase_step = 85;
  CHECK(t.learning_rate_factor() == 0.25);
}

TEST_CASE("three consecutive non-finite losses abort the phase") {
  Trainer t(testing::tiny_config());
  t.begin_phase(Phase::pretrain_dhln, 10);
  auto pairs = t.sample_batch(toy_data());
  {
    torch::NoGradGuard guard;
    t.dhln()->heatmap_head(0)->bias.fill_(std::numeric_limits<float>::quiet_NaN());
  }
  CHECK(t.step_dhln(pairs).skipped);
  CHECK(t.step_dhln(pairs).skipped);
  CHECK(code_of([&] { t.step_dhln(pairs); }) == ErrorCode::NonFiniteLoss);
}

TEST_CASE("discriminator gradients come from the discriminator objective alone") {
  auto cfg = testing::tiny_config();
  auto data = toy_data();
  Trainer a(cfg), b(cfg);
  for (Trainer* t : {&a, &b}) {
    t->state().dhln_pretrained = true;
    t->state().fptn_pretrained = true;
    t->begin_phase(Phase::finetune_sht, 3);
  }
  auto pairs = a.sample_batch(data);
  a.step_sht(pairs);

  // Recompute the discriminator objective at b's (pre-step, identical) weights.
  auto batch = collate(pairs, cfg);
  b.dhln()->train();
  b.fptn().generator->train();
  b.fptn().d_appearance->train();
  b.fptn().d_shape->train();
  auto out = b.dhln()->forward(batch.lr);
  auto tr = transfer_from_dhln(batch, out);
  auto fake = b.fptn().generator->forward(tr.i_con, tr.h_con, tr.h_tar);
  TransferBatch d{tr.i_con.detach(), tr.h_con.detach(), tr.h_tar.detach(), tr.i_tar.detach()};
  auto loss = loss_pt(d.i_tar, fake.detach(), real_scores(b.fptn(), d), fake_scores(b.fptn(), d, fake.detach()),
                      cfg.lambda, GanRole::Discriminator, nullptr);
  loss.total.backward();
  auto compare = [](PatchDiscriminator& x, PatchDiscriminator& y) {
    auto gy = y->named_parameters();
    for (const auto& item : x->named_parameters()) {
      CHECK(torch::allclose(item.value().grad(), gy[item.key()].grad(), 1e-5, 1e-8));
    }
  };
  compare(a.fptn().d_appearance, b.fptn().d_appearance);
  compare(a.fptn().d_shape, b.fptn().d_shape);
  // The discriminator objective leaves the generator and DHLN without gradient.
  for (const auto& p : b.fptn().generator->parameters()) CHECK_FALSE(p.grad().defined());
  for (const auto& p : b.dhln()->parameters()) CHECK_FALSE(p.grad().defined());
}

TEST_CASE("checkpoint round trip and corruption") {
  auto dir = testing::temp_dir("ckpt");
  auto cfg = testing::tiny_config();
  Trainer t(cfg);
  auto data = toy_data();
  t.run_phase(Phase::pretrain_dhln, data, 2);
  t.save_checkpoint(dir / "a.ckpt");
  auto c = read_checkpoint(dir / "a.ckpt");
  CHECK(c.config() == cfg);
  CHECK(c.has_section("dhln"));
  CHECK_FALSE(c.has_section("generator"));

  Trainer u(cfg);
  u.load_checkpoint(dir / "a.ckpt");
  CHECK(same_params(*t.dhln(), *u.dhln()));
  CHECK(u.state().step == 2);
  CHECK(u.state().dhln_pretrained);

  auto other = cfg;
  other.num_landmarks = 4;
  Trainer w(validate_config(other));
  CHECK(code_of([&] { w.load_checkpoint(dir / "a.ckpt"); }) == ErrorCode::CheckpointMismatch);

  {
    std::ofstream f(dir / "bad.ckpt", std::ios::binary);
    f << "not a checkpoint";
  }
  CHECK(code_of([&] { read_checkpoint(dir / "bad.ckpt"); }) == ErrorCode::CheckpointReadError);
  const auto size = fs::file_size(dir / "a.ckpt");
  fs::resize_file(dir / "a.ckpt", size / 2);
  CHECK(code_of([&] { read_checkpoint(dir / "a.ckpt"); }) == ErrorCode::CheckpointReadError);
  CHECK(code_of([&] { read_checkpoint(dir / "missing.ckpt"); }) == ErrorCode::CheckpointReadError);
  fs::remove_all(dir);
}

TEST_CASE("resuming from a checkpoint continues bitwise identically") {
  auto dir = testing::temp_dir("resume");
  auto cfg = testing::tiny_config();
  auto data = toy_data();
  for (Phase phase : {Phase::pretrain_dhln, Phase::pretrain_fptn}) {
    Trainer straight(cfg);
    straight.run_phase(phase, data, 4);

    Trainer first(cfg);
    first.begin_phase(phase, 4);
    RunOptions opt;
    int seen = 0;
    opt.on_step = [&](const StepRecord&) {
      if (++seen == 2) first.save_checkpoint(dir / "mid.ckpt");
    };
    first.run_phase(phase, data, 4, opt);

    Trainer resumed(cfg);
    resumed.load_checkpoint(dir / "mid.ckpt");
    CHECK(resumed.state().phase_step == 2);
    resumed.run_phase(phase, data, 4);
    REQUIRE(resumed.state().history.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(resumed.state().history[i].total == straight.state().history[i].total);
    }
    if (phase == Phase::pretrain_dhln) {
      CHECK(same_params(*resumed.dhln(), *straight.dhln()));
    } else {
      CHECK(same_params(*resumed.fptn().generator, *straight.fptn().generator));
      CHECK(same_params(*resumed.fptn().d_shape, *straight.fptn().d_shape));
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("metrics log holds one json record per step") {
  auto dir = testing::temp_dir("log");
  Trainer t(testing::tiny_config());
  RunOptions opt;
  opt.log_path = dir / "log.jsonl";
  t.run_phase(Phase::pretrain_dhln, toy_data(), 3, opt);
  std::ifstream f(opt.log_path);
  std::string line;
  int n = 0;
  while (std::getline(f, line)) {
    CHECK(line.find("\"phase\":\"pretrain_dhln\"") != std::string::npos);
    ++n;
  }
  CHECK(n == 3);
  auto back = TrainState::from_json(t.state().to_json());
  CHECK(back.history.size() == 3);
  CHECK(back.history[2].total == t.state().history[2].total);
  fs::remove_all(dir);
}
