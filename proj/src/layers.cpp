#include "sht/layers.hpp"

namespace F = torch::nn::functional;

namespace sht {

namespace {

torch::nn::Conv2d conv(int in, int out, int kernel) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel).padding(kernel / 2));
}

}  // namespace

void zero_conv(torch::nn::Conv2d& c) {
  torch::NoGradGuard guard;
  c->weight.zero_();
  if (c->bias.defined()) c->bias.zero_();
}

int64_t count_parameters(const torch::nn::Module& module) {
  int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

BottleneckImpl::BottleneckImpl(int in_channels, int out_channels) {
  const int mid = out_channels / 2;
  bn1 = register_module("bn1", torch::nn::BatchNorm2d(in_channels));
  conv1 = register_module("conv1", conv(in_channels, mid, 1));
  bn2 = register_module("bn2", torch::nn::BatchNorm2d(mid));
  conv2 = register_module("conv2", conv(mid, mid, 3));
  bn3 = register_module("bn3", torch::nn::BatchNorm2d(mid));
  conv3 = register_module("conv3", conv(mid, out_channels, 1));
  if (in_channels != out_channels) skip = register_module("skip", conv(in_channels, out_channels, 1));
}

torch::Tensor BottleneckImpl::forward(const torch::Tensor& x) {
  auto y = conv1(torch::relu(bn1(x)));
  y = conv2(torch::relu(bn2(y)));
  y = conv3(torch::relu(bn3(y)));
  return y + (skip ? skip(x) : x);
}

ResidualBlockImpl::ResidualBlockImpl(int channels) {
  conv1 = register_module("conv1", conv(channels, channels, 3));
  conv2 = register_module("conv2", conv(channels, channels, 3));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  return x + conv2(torch::relu(conv1(x)));
}

void ResidualBlockImpl::zero_residual() { zero_conv(conv2); }

HourglassImpl::HourglassImpl(int depth, int channels, int skip_residuals) {
  skip_branch = register_module("skip", torch::nn::Sequential());
  for (int i = 0; i < skip_residuals; ++i) skip_branch->push_back(Bottleneck(channels, channels));
  down = register_module("down", Bottleneck(channels, channels));
  if (depth > 1) {
    inner = register_module("inner", std::make_shared<HourglassImpl>(depth - 1, channels, skip_residuals));
  } else {
    bottom = register_module("bottom", Bottleneck(channels, channels));
  }
  up = register_module("up", Bottleneck(channels, channels));
}

torch::Tensor HourglassImpl::forward(const torch::Tensor& x) {
  auto skip = skip_branch->forward(x);
  auto low = down(F::max_pool2d(x, F::MaxPool2dFuncOptions(2).stride(2)));
  low = inner ? inner->forward(low) : bottom(low);
  low = up(low);
  auto upsampled = F::interpolate(low, F::InterpolateFuncOptions()
                                           .scale_factor(std::vector<double>{2.0, 2.0})
                                           .mode(torch::kNearest));
  return skip + upsampled;
}

}  // namespace sht
