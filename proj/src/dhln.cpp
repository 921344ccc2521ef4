#include "sht/dhln.hpp"

namespace sht {

namespace {

torch::nn::Conv2d conv(int in, int out, int kernel) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel).padding(kernel / 2));
}

void expect_channels(const torch::Tensor& t, int channels, const char* what) {
  require(t.dim() == 4 && t.size(1) == channels, ErrorCode::ShapeMismatch,
          std::string(what) + ": expected N×" + std::to_string(channels) + "×h×w");
}

}  // namespace

// ---------------------------------------------------------------------------

HourglassUnitImpl::HourglassUnitImpl(int depth, int channels, int skip_residuals)
    : channels_(channels) {
  hourglass = register_module("hourglass", Hourglass(depth, channels, skip_residuals));
  post = register_module("post", Bottleneck(channels, channels));
  final_conv = register_module("final_conv", conv(channels, channels, 1));
  final_bn = register_module("final_bn", torch::nn::BatchNorm2d(channels));
}

torch::Tensor HourglassUnitImpl::forward(const torch::Tensor& p) {
  expect_channels(p, channels_, "hourglass unit");
  return torch::relu(final_bn(final_conv(post(hourglass(p)))));
}

void HourglassUnitImpl::zero_final_layer() { zero_conv(final_conv); }

SRModuleImpl::SRModuleImpl(int channels, int blocks) : channels_(channels) {
  for (int i = 0; i < blocks; ++i) {
    blocks_.push_back(register_module("block" + std::to_string(i), ResidualBlock(channels)));
  }
}

torch::Tensor SRModuleImpl::forward(const torch::Tensor& q) {
  expect_channels(q, channels_, "sr module");
  auto y = q;
  for (auto& b : blocks_) y = b(y);
  return y;
}

void SRModuleImpl::zero_residuals() {
  for (auto& b : blocks_) b->zero_residual();
}

FuBlock1Impl::FuBlock1Impl(int pose_channels, int sr_channels)
    : pose_channels_(pose_channels), sr_channels_(sr_channels) {
  conv1 = register_module("conv1", conv(pose_channels, sr_channels, 3));
  conv2 = register_module("conv2", conv(sr_channels, sr_channels, 3));
  project = register_module("project", conv(pose_channels, sr_channels, 1));
}

torch::Tensor FuBlock1Impl::attention_logits(const torch::Tensor& p) {
  return conv2(torch::relu(conv1(p))) + project(p);
}

torch::Tensor FuBlock1Impl::forward(const torch::Tensor& p, const torch::Tensor& q) {
  expect_channels(p, pose_channels_, "fublock1 pose input");
  expect_channels(q, sr_channels_, "fublock1 sr input");
  require(p.size(2) == q.size(2) && p.size(3) == q.size(3), ErrorCode::ShapeMismatch,
          "fublock1: pose and sr features differ in spatial size");
  return q + q * torch::sigmoid(attention_logits(p));
}

void FuBlock1Impl::zero_attention() {
  zero_conv(conv1);
  zero_conv(conv2);
  zero_conv(project);
}

FuBlock2Impl::FuBlock2Impl(int pose_channels, int sr_channels, int kernel)
    : pose_channels_(pose_channels), sr_channels_(sr_channels) {
  conv = register_module("conv", sht::conv(pose_channels + sr_channels, pose_channels, kernel));
}

torch::Tensor FuBlock2Impl::forward(const torch::Tensor& p, const torch::Tensor& q_prime) {
  expect_channels(p, pose_channels_, "fublock2 pose input");
  expect_channels(q_prime, sr_channels_, "fublock2 sr input");
  require(p.size(2) == q_prime.size(2) && p.size(3) == q_prime.size(3), ErrorCode::ShapeMismatch,
          "fublock2: pose and sr features differ in spatial size");
  return p + conv(torch::cat({p, q_prime}, 1));
}

void FuBlock2Impl::zero_conv() { sht::zero_conv(conv); }

// ---------------------------------------------------------------------------

DHLNImpl::DHLNImpl(const SHTConfig& cfg) : cfg_(validate_config(cfg)) {
  const int c = cfg_.pose_channels;
  const int s = cfg_.sr_channels;
  pose_stem = register_module(
      "pose_stem", torch::nn::Sequential(conv(3, c / 2, 3), torch::nn::BatchNorm2d(c / 2),
                                         torch::nn::ReLU(), Bottleneck(c / 2, c), Bottleneck(c, c)));
  sr_stem = register_module("sr_stem", conv(3, s, 3));
  for (int t = 0; t < cfg_.num_stacks; ++t) {
    const auto id = std::to_string(t);
    hourglass_.push_back(register_module(
        "hourglass" + id, HourglassUnit(cfg_.hourglass_depth, c, cfg_.hourglass_skip_residuals)));
    sr_.push_back(register_module("sr" + id, SRModule(s, cfg_.sr_blocks_per_module)));
    fu1_.push_back(register_module("fublock1_" + id, FuBlock1(c, s)));
    fu2_.push_back(register_module("fublock2_" + id, FuBlock2(c, s, cfg_.fusion_kernel)));
    heads_.push_back(register_module("head" + id, conv(c, cfg_.num_landmarks, 1)));
  }
  sr_upsampler = register_module("sr_upsampler", torch::nn::Sequential());
  for (int i = 0; i < cfg_.upsample_stages(); ++i) {
    sr_upsampler->push_back(conv(s, 4 * s, 3));
    sr_upsampler->push_back(torch::nn::PixelShuffle(2));
    sr_upsampler->push_back(torch::nn::ReLU());
  }
  sr_out = register_module("sr_out", conv(s, 3, 3));
  // Start the hallucinated face near mid-gray rather than on the clamp.
  torch::NoGradGuard guard;
  sr_out->bias.fill_(0.5);
}

DHLNTrace DHLNImpl::trace(const torch::Tensor& lr, bool fusion) {
  require(lr.dim() == 4 && lr.size(1) == 3 && lr.size(2) == cfg_.input_size &&
              lr.size(3) == cfg_.input_size,
          ErrorCode::ShapeMismatch,
          "DHLN expects N×3×" + std::to_string(cfg_.input_size) + "×" + std::to_string(cfg_.input_size));
  DHLNTrace tr;
  auto p = pose_stem->forward(lr);
  auto q = sr_stem(lr);
  for (int t = 0; t < cfg_.num_stacks; ++t) {
    p = hourglass_[t](p);
    q = sr_[t](q);
    tr.hourglass_out.push_back({p, q, t + 1});
    if (fusion) {
      q = fu1_[t](p, q);
      p = fu2_[t](p, q);
    }
    tr.fused.push_back({p, q, t + 1});
    tr.output.heatmaps.push_back(heads_[t](p));
  }
  tr.output.sr_image = sr_out(sr_upsampler->forward(q)).clamp(0.0, 1.0);
  return tr;
}

DHLNOutput DHLNImpl::forward(const torch::Tensor& lr) { return trace(lr).output; }

void DHLNImpl::zero_init_fusion_and_sr() {
  for (auto& f : fu2_) f->zero_conv();
  for (auto& s : sr_) s->zero_residuals();
}

namespace {

void check_output(const DHLNOutput& out) {
  for (std::size_t t = 0; t < out.heatmaps.size(); ++t) {
    check_finite(out.heatmaps[t].detach(), ErrorCode::NonFiniteActivation,
                 "heatmaps of stack " + std::to_string(t + 1));
  }
  check_finite(out.sr_image.detach(), ErrorCode::NonFiniteActivation, "hallucinated image");
}

}  // namespace

DHLNOutput dhln_forward_batch(DHLN& model, const torch::Tensor& lr) {
  auto out = model->forward(lr);
  check_output(out);
  return out;
}

DHLNOutput dhln_forward(DHLN& model, const ImageTensor& lr_image) {
  const auto& cfg = model->config();
  require(lr_image.channels() == 3 && lr_image.height() == cfg.input_size &&
              lr_image.width() == cfg.input_size,
          ErrorCode::ShapeMismatch,
          "LR image must be " + std::to_string(cfg.input_size) + "²×3");
  torch::NoGradGuard guard;
  const bool was_training = model->is_training();
  model->eval();
  auto out = dhln_forward_batch(model, lr_image.batched());
  if (was_training) model->train();
  return out;
}

}  // namespace sht
