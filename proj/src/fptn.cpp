#include "sht/fptn.hpp"

#include <algorithm>
#include <cmath>

namespace F = torch::nn::functional;

namespace sht {

namespace {

torch::nn::Conv2d conv(int in, int out, int kernel, int stride = 1) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2));
}

void append_conv_bn_relu(torch::nn::Sequential& seq, int in, int out, int kernel, int stride = 1) {
  seq->push_back(conv(in, out, kernel, stride));
  seq->push_back(torch::nn::BatchNorm2d(out));
  seq->push_back(torch::nn::ReLU());
}

/// Encoder widths double per down stage up to 4× the base width.
int stage_width(int base, int stage) { return base << std::min(stage, 2); }

torch::nn::Sequential make_encoder(int in_channels, int base, int stages) {
  torch::nn::Sequential enc;
  append_conv_bn_relu(enc, in_channels, base, 3);
  for (int s = 0; s < stages; ++s) append_conv_bn_relu(enc, stage_width(base, s), stage_width(base, s + 1), 3, 2);
  return enc;
}

void require_batch(const torch::Tensor& t, int channels, int size, const std::string& what) {
  require(t.dim() == 4 && (channels < 0 || t.size(1) == channels) && t.size(2) == size && t.size(3) == size,
          ErrorCode::ShapeMismatch, what + ": unexpected shape");
}

}  // namespace

torch::Tensor upsample_heatmaps(const torch::Tensor& maps, int size) {
  require(maps.dim() == 4, ErrorCode::ShapeMismatch, "heatmaps must be N×L×h×w");
  if (maps.size(2) == size && maps.size(3) == size) return maps;
  return F::interpolate(maps, F::InterpolateFuncOptions()
                                  .size(std::vector<int64_t>{size, size})
                                  .mode(torch::kBilinear)
                                  .align_corners(false));
}

// ---------------------------------------------------------------------------

TransferBlockImpl::TransferBlockImpl(int channels) {
  image_last_bn = torch::nn::BatchNorm2d(channels);
  image_branch = register_module(
      "image_branch", torch::nn::Sequential(conv(channels, channels, 3), torch::nn::BatchNorm2d(channels),
                                            torch::nn::ReLU(), conv(channels, channels, 3), image_last_bn));
  pose_branch = register_module(
      "pose_branch", torch::nn::Sequential(conv(channels, channels, 3), torch::nn::BatchNorm2d(channels),
                                           torch::nn::ReLU(), conv(channels, channels, 3),
                                           torch::nn::BatchNorm2d(channels)));
  pose_merge = register_module("pose_merge", conv(2 * channels, channels, 1));
}

std::pair<torch::Tensor, torch::Tensor> TransferBlockImpl::forward(const torch::Tensor& img,
                                                                   const torch::Tensor& pose) {
  auto y_pose = pose_branch->forward(pose);
  auto img_out = img + image_branch->forward(img) * torch::sigmoid(y_pose);
  auto pose_out = pose_merge(torch::cat({img_out, y_pose}, 1));
  return {img_out, pose_out};
}

void TransferBlockImpl::zero_residual() {
  torch::NoGradGuard guard;
  image_last_bn->weight.zero_();
  image_last_bn->bias.zero_();
}

GeneratorImpl::GeneratorImpl(const SHTConfig& cfg) : cfg_(validate_config(cfg)) {
  const int base = cfg_.fptn_channels;
  const int stages = cfg_.fptn_down_stages();
  const int width = stage_width(base, stages);
  image_encoder = register_module("image_encoder", make_encoder(3, base, stages));
  pose_encoder = register_module("pose_encoder", make_encoder(2 * cfg_.num_landmarks, base, stages));
  for (int b = 0; b < cfg_.fptn_blocks; ++b) {
    blocks_.push_back(register_module("block" + std::to_string(b), TransferBlock(width)));
  }
  decoder = register_module("decoder", torch::nn::Sequential());
  for (int s = stages; s > 0; --s) {
    decoder->push_back(torch::nn::ConvTranspose2d(
        torch::nn::ConvTranspose2dOptions(stage_width(base, s), stage_width(base, s - 1), 4).stride(2).padding(1)));
    decoder->push_back(torch::nn::BatchNorm2d(stage_width(base, s - 1)));
    decoder->push_back(torch::nn::ReLU());
  }
  out = register_module("out", conv(base, 3, 3));
  torch::NoGradGuard guard;
  out->bias.fill_(0.5);
}

std::pair<torch::Tensor, torch::Tensor> GeneratorImpl::encode(const torch::Tensor& i_con, const torch::Tensor& h_con,
                                                              const torch::Tensor& h_tar) {
  const int s = cfg_.sr_output_size;
  require_batch(i_con, 3, s, "condition image");
  require(h_con.dim() == 4 && h_con.sizes() == h_tar.sizes() && h_con.size(1) == cfg_.num_landmarks &&
              h_con.size(0) == i_con.size(0),
          ErrorCode::ShapeMismatch, "condition and target heatmaps must be N×L×h×w and agree");
  auto pose_in = torch::cat({upsample_heatmaps(h_con, s), upsample_heatmaps(h_tar, s)}, 1);
  return {image_encoder->forward(i_con), pose_encoder->forward(pose_in)};
}

torch::Tensor GeneratorImpl::transfer(torch::Tensor img, torch::Tensor pose) {
  for (auto& b : blocks_) std::tie(img, pose) = b->forward(img, pose);
  return img;
}

torch::Tensor GeneratorImpl::decode(const torch::Tensor& img) {
  return out(decoder->forward(img)).clamp(0.0, 1.0);
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& i_con, const torch::Tensor& h_con,
                                     const torch::Tensor& h_tar) {
  auto [img, pose] = encode(i_con, h_con, h_tar);
  return decode(transfer(img, pose));
}

void GeneratorImpl::zero_transfer_residuals() {
  for (auto& b : blocks_) b->zero_residual();
}

// ---------------------------------------------------------------------------

PatchDiscriminatorImpl::PatchDiscriminatorImpl(int in_channels, int width) : in_channels_(in_channels) {
  auto c4 = [](int in, int out, int stride) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 4).stride(stride).padding(1));
  };
  auto lrelu = [] { return torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)); };
  body = register_module(
      "body", torch::nn::Sequential(c4(in_channels, width, 2), lrelu(), c4(width, 2 * width, 2),
                                    torch::nn::BatchNorm2d(2 * width), lrelu(), c4(2 * width, 4 * width, 2),
                                    torch::nn::BatchNorm2d(4 * width), lrelu(), c4(4 * width, 1, 1)));
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& x) {
  require(x.dim() == 4 && x.size(1) == in_channels_, ErrorCode::ShapeMismatch,
          "discriminator input has " + std::to_string(x.dim() == 4 ? x.size(1) : -1) + " channels, expected " +
              std::to_string(in_channels_));
  return body->forward(x).mean({1, 2, 3});
}

FPTN::FPTN(const SHTConfig& cfg) {
  const auto c = validate_config(cfg);
  generator = Generator(c);
  d_appearance = PatchDiscriminator(6, c.disc_channels);
  d_shape = PatchDiscriminator(c.num_landmarks + 3, c.disc_channels);
}

// ---------------------------------------------------------------------------

double clamp_score(double raw) { return std::clamp(raw, kScoreEpsilon, 1.0 - kScoreEpsilon); }

torch::Tensor squash_scores(const torch::Tensor& logits) {
  return torch::sigmoid(logits.to(torch::kFloat64)).clamp(kScoreEpsilon, 1.0 - kScoreEpsilon);
}

torch::Tensor appearance_logits(PatchDiscriminator& d, const torch::Tensor& i_con, const torch::Tensor& i_query) {
  require(i_con.dim() == 4 && i_con.sizes() == i_query.sizes(), ErrorCode::ShapeMismatch,
          "appearance discriminator inputs differ in shape");
  return d(torch::cat({i_con, i_query}, 1));
}

torch::Tensor shape_logits(PatchDiscriminator& d, const torch::Tensor& h_tar, const torch::Tensor& i_query) {
  require(i_query.dim() == 4 && h_tar.dim() == 4 && h_tar.size(0) == i_query.size(0), ErrorCode::ShapeMismatch,
          "shape discriminator inputs differ in batch size");
  require(i_query.size(2) == i_query.size(3), ErrorCode::ShapeMismatch, "query image must be square");
  return d(torch::cat({upsample_heatmaps(h_tar, static_cast<int>(i_query.size(2))), i_query}, 1));
}

torch::Tensor appearance_scores(PatchDiscriminator& d, const torch::Tensor& i_con, const torch::Tensor& i_query) {
  return squash_scores(appearance_logits(d, i_con, i_query));
}

torch::Tensor shape_scores(PatchDiscriminator& d, const torch::Tensor& h_tar, const torch::Tensor& i_query) {
  return squash_scores(shape_logits(d, h_tar, i_query));
}

namespace {

/// Runs `fn` in inference mode with the module in eval state, restoring it.
template <typename M, typename Fn>
auto inference(M& module, Fn fn) {
  torch::NoGradGuard guard;
  const bool was_training = module->is_training();
  module->eval();
  auto result = fn();
  if (was_training) module->train();
  return result;
}

}  // namespace

ImageTensor generator_forward(Generator& g, const TransferInput& inp) {
  const auto& cfg = g->config();
  require(inp.h_con.maps().sizes() == inp.h_tar.maps().sizes(), ErrorCode::ShapeMismatch,
          "condition and target heatmaps differ in shape");
  require(inp.i_con.height() == cfg.sr_output_size && inp.i_con.width() == cfg.sr_output_size &&
              inp.i_con.channels() == 3,
          ErrorCode::ShapeMismatch, "condition image must be " + std::to_string(cfg.sr_output_size) + "²×3");
  auto y = inference(g, [&] {
    return g->forward(inp.i_con.batched(), inp.h_con.maps().unsqueeze(0).to(torch::kFloat32),
                      inp.h_tar.maps().unsqueeze(0).to(torch::kFloat32));
  });
  check_finite(y, ErrorCode::NonFiniteActivation, "generated image");
  return ImageTensor::clamped(y.squeeze(0), ImageRole::Generated);
}

double discriminator_appearance(PatchDiscriminator& d, const ImageTensor& i_con, const ImageTensor& i_query) {
  require(i_con.data().sizes() == i_query.data().sizes(), ErrorCode::ShapeMismatch,
          "appearance discriminator inputs differ in shape");
  return inference(d, [&] { return appearance_scores(d, i_con.batched(), i_query.batched()).item<double>(); });
}

double discriminator_shape(PatchDiscriminator& d, const HeatmapStack& h_tar, const ImageTensor& i_query) {
  return inference(d, [&] {
    return shape_scores(d, h_tar.maps().unsqueeze(0).to(torch::kFloat32), i_query.batched()).item<double>();
  });
}

}  // namespace sht
