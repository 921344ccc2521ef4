#include "sht/losses.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>

namespace F = torch::nn::functional;

namespace sht {

namespace {

constexpr double kDelta = 1e-24;

/// Per-sample mean over all non-batch dimensions, summed over the batch.
torch::Tensor batch_sum_of_means(const torch::Tensor& per_element) {
  return per_element.flatten(1).mean(1).sum();
}

void require_same(const torch::Tensor& a, const torch::Tensor& b, const std::string& what) {
  require(a.defined() && b.defined() && a.sizes() == b.sizes(), ErrorCode::ShapeMismatch,
          what + ": operands differ in shape");
  require(a.dim() == 4, ErrorCode::ShapeMismatch, what + ": expected N×C×H×W");
}

void require_scores(const torch::Tensor& s, const char* what) {
  require(s.defined(), ErrorCode::InvalidArgument, std::string(what) + " scores missing");
  auto d = s.detach().to(torch::kFloat64);
  const bool ok = d.numel() == 0 ||
                  (d.min().item<double>() >= kScoreEpsilon && d.max().item<double>() <= 1.0 - kScoreEpsilon);
  require(ok, ErrorCode::ScoreOutOfRange, std::string(what) + " scores outside [ε, 1−ε]");
}

}  // namespace

// ---------------------------------------------------------------------------

void LossBreakdown::add(const std::string& name, torch::Tensor value, double weight) {
  require(components.count(name) == 0, ErrorCode::InvalidArgument, "duplicate loss component " + name);
  components[name] = std::move(value);
  weights[name] = weight;
  total = weighted_sum();
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& other) {
  for (const auto& [name, value] : other.components) {
    const double w = other.weights.at(name);
    auto it = components.find(name);
    if (it == components.end()) {
      components[name] = value;
      weights[name] = w;
    } else {
      require(weights.at(name) == w, ErrorCode::InvalidArgument, "loss component " + name + " weighted inconsistently");
      it->second = it->second + value;
    }
  }
  total = weighted_sum();
  return *this;
}

torch::Tensor LossBreakdown::weighted_sum() const {
  torch::Tensor sum;
  for (const auto& [name, value] : components) {
    auto term = value * weights.at(name);
    sum = sum.defined() ? sum + term : term;
  }
  return sum.defined() ? sum : torch::zeros({}, torch::kFloat64);
}

double LossBreakdown::value() const { return total.defined() ? total.item<double>() : 0.0; }

double LossBreakdown::component(const std::string& name) const {
  auto it = components.find(name);
  require(it != components.end(), ErrorCode::InvalidArgument, "no loss component " + name);
  return it->second.item<double>();
}

std::map<std::string, double> LossBreakdown::values() const {
  std::map<std::string, double> out;
  for (const auto& [name, value] : components) out[name] = value.item<double>();
  return out;
}

// ---------------------------------------------------------------------------

torch::Tensor gradient_map(const torch::Tensor& img) {
  require(img.dim() == 3 || img.dim() == 4, ErrorCode::ShapeMismatch, "gradient_map expects C×H×W or N×C×H×W");
  const bool single = img.dim() == 3;
  auto x = single ? img.unsqueeze(0) : img;
  auto padded = F::pad(x, F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReplicate));
  const int64_t h = x.size(2);
  const int64_t w = x.size(3);
  using torch::indexing::Slice;
  auto ix = padded.index({Slice(), Slice(), Slice(1, h + 1), Slice(2, w + 2)}) -
            padded.index({Slice(), Slice(), Slice(1, h + 1), Slice(0, w)});
  auto iy = padded.index({Slice(), Slice(), Slice(2, h + 2), Slice(1, w + 1)}) -
            padded.index({Slice(), Slice(), Slice(0, h), Slice(1, w + 1)});
  auto g = torch::sqrt(ix * ix + iy * iy + kDelta) - std::sqrt(kDelta);
  return single ? g.squeeze(0) : g;
}

ImageTensor gradient_map(const ImageTensor& img) {
  // Magnitudes of unit-range images lie in [0, 2·sqrt(2)].
  return ImageTensor(gradient_map(img.data()), ImageRole::Generated, {0.0, 2.0 * std::sqrt(2.0) + 1e-6});
}

LossBreakdown loss_dh(const std::vector<torch::Tensor>& stacks, const torch::Tensor& h_star,
                      const torch::Tensor& labeled, const torch::Tensor& i_sr, const torch::Tensor& i_hr,
                      const std::array<double, 3>& gamma) {
  require(!stacks.empty(), ErrorCode::InvalidArgument, "loss_dh needs at least one heatmap stack");
  require(gamma[0] == 0.0 || gamma[0] == 1.0, ErrorCode::InvalidArgument, "γ1 must be 0 or 1");
  require_same(i_sr, i_hr, "loss_dh images");
  const int64_t n = i_sr.size(0);
  require(labeled.defined() && labeled.dim() == 1 && labeled.size(0) == n, ErrorCode::ShapeMismatch,
          "labeled mask must have one entry per sample");

  auto mask = labeled.to(torch::kBool);
  torch::Tensor heatmap;
  if (gamma[0] != 0.0 && mask.any().item<bool>()) {
    require(h_star.defined(), ErrorCode::InvalidArgument, "labeled samples need ground-truth heatmaps");
    auto idx = mask.nonzero().squeeze(1);
    auto target = h_star.index_select(0, idx);
    for (const auto& h : stacks) {
      require_same(h, h_star, "loss_dh heatmaps");
      auto term = batch_sum_of_means((h.index_select(0, idx) - target).pow(2));
      heatmap = heatmap.defined() ? heatmap + term : term;
    }
  } else {
    heatmap = torch::zeros({}, i_sr.options().requires_grad(false));
  }

  LossBreakdown out;
  out.add(component::kHeatmapMse, heatmap, gamma[0]);
  out.add(component::kImageL1, batch_sum_of_means((i_sr - i_hr).abs()), gamma[1]);
  out.add(component::kGradientL1, batch_sum_of_means((gradient_map(i_sr) - gradient_map(i_hr)).abs()), gamma[2]);
  return out;
}

torch::Tensor loss_gan(const DiscriminatorScores& real, const DiscriminatorScores& fake, GanRole role,
                       bool non_saturating) {
  require_scores(fake.appearance, "fake appearance");
  require_scores(fake.shape, "fake shape");
  if (role == GanRole::Discriminator) {
    require_scores(real.appearance, "real appearance");
    require_scores(real.shape, "real shape");
    return (torch::log(real.appearance) + torch::log(real.shape) + torch::log(1.0 - fake.appearance) +
            torch::log(1.0 - fake.shape))
        .sum();
  }
  if (non_saturating) return -(torch::log(fake.appearance) + torch::log(fake.shape)).sum();
  return (torch::log(1.0 - fake.appearance) + torch::log(1.0 - fake.shape)).sum();
}

torch::Tensor loss_l1_transfer(const torch::Tensor& i_tar, const torch::Tensor& i_ger) {
  require_same(i_tar, i_ger, "loss_l1_transfer");
  return batch_sum_of_means((i_ger - i_tar).abs());
}

double loss_l1_transfer(const ImageTensor& i_tar, const ImageTensor& i_ger) {
  return loss_l1_transfer(i_tar.data().unsqueeze(0), i_ger.data().unsqueeze(0)).item<double>();
}

// ---------------------------------------------------------------------------

PerceptualExtractorImpl::PerceptualExtractorImpl() {
  conv1_1 = register_module("conv1_1", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, 64, 3).padding(1)));
  conv1_2 = register_module("conv1_2", torch::nn::Conv2d(torch::nn::Conv2dOptions(64, 64, 3).padding(1)));
  mean_ = register_buffer("mean", torch::tensor({0.485, 0.456, 0.406}, torch::kFloat32).view({1, 3, 1, 1}));
  std_ = register_buffer("std", torch::tensor({0.229, 0.224, 0.225}, torch::kFloat32).view({1, 3, 1, 1}));
  freeze();
}

void PerceptualExtractorImpl::freeze() {
  for (auto& p : parameters()) p.set_requires_grad(false);
  eval();
}

torch::Tensor PerceptualExtractorImpl::forward(const torch::Tensor& x) {
  require(x.dim() == 4 && x.size(1) == 3, ErrorCode::ShapeMismatch, "perceptual extractor expects N×3×H×W");
  return conv1_2(torch::relu(conv1_1((x - mean_) / std_)));
}

std::shared_ptr<PerceptualExtractorImpl> PerceptualExtractorImpl::surrogate(std::uint64_t seed) {
  auto phi = std::make_shared<PerceptualExtractorImpl>();
  auto gen = at::detail::createCPUGenerator(seed);
  torch::NoGradGuard guard;
  for (auto* conv : {&phi->conv1_1, &phi->conv1_2}) {
    auto& w = (*conv)->weight;
    const double fan_in = static_cast<double>(w.size(1) * w.size(2) * w.size(3));
    w.copy_(at::randn(w.sizes(), gen, torch::kFloat32) * std::sqrt(2.0 / fan_in));
    (*conv)->bias.zero_();
  }
  phi->identity_ = "surrogate(seed=" + std::to_string(seed) + ")/conv1_2";
  return phi;
}

std::shared_ptr<PerceptualExtractorImpl> PerceptualExtractorImpl::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::ExtractorUnavailable, "perceptual weights not found: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  torch::IValue value;
  try {
    value = torch::pickle_load(bytes);
  } catch (const c10::Error& e) {
    fail(ErrorCode::ExtractorUnavailable, "cannot parse perceptual weights " + path.string());
  }
  require(value.isGenericDict(), ErrorCode::ExtractorUnavailable, "perceptual weights must be a tensor dictionary");
  auto dict = value.toGenericDict();
  auto phi = std::make_shared<PerceptualExtractorImpl>();
  torch::NoGradGuard guard;
  auto assign = [&](const std::string& key, torch::Tensor& target) {
    auto it = dict.find(key);
    require(it != dict.end() && it->value().isTensor(), ErrorCode::ExtractorUnavailable,
            "perceptual weights lack " + key);
    auto t = it->value().toTensor();
    require(t.sizes() == target.sizes(), ErrorCode::ExtractorUnavailable, "perceptual weight " + key + " has wrong shape");
    target.copy_(t.to(torch::kFloat32));
  };
  assign("conv1_1.weight", phi->conv1_1->weight);
  assign("conv1_1.bias", phi->conv1_1->bias);
  assign("conv1_2.weight", phi->conv1_2->weight);
  assign("conv1_2.bias", phi->conv1_2->bias);
  phi->identity_ = "vgg19/conv1_2(" + path.filename().string() + ")";
  return phi;
}

void PerceptualExtractorImpl::save(const std::filesystem::path& path) const {
  c10::Dict<std::string, torch::Tensor> dict;
  dict.insert("conv1_1.weight", conv1_1->weight.detach());
  dict.insert("conv1_1.bias", conv1_1->bias.detach());
  dict.insert("conv1_2.weight", conv1_2->weight.detach());
  dict.insert("conv1_2.bias", conv1_2->bias.detach());
  const auto bytes = torch::pickle_save(dict);
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorCode::CheckpointWriteError, "cannot write " + path.string());
}

PerceptualExtractor make_perceptual_extractor(const SHTConfig& cfg) {
  if (cfg.perceptual_weights == kSurrogateWeights) {
    return PerceptualExtractor(PerceptualExtractorImpl::surrogate(cfg.seed));
  }
  try {
    require(!cfg.perceptual_weights.empty(), ErrorCode::ExtractorUnavailable, "no perceptual weights configured");
    return PerceptualExtractor(PerceptualExtractorImpl::load(cfg.perceptual_weights));
  } catch (const Error& e) {
    if (!cfg.drop_perceptual_if_missing) throw;
    std::cerr << "warning: " << e.what() << "; perceptual term dropped\n";
    return PerceptualExtractor(nullptr);
  }
}

torch::Tensor loss_perceptual(const torch::Tensor& i_tar, const torch::Tensor& i_ger, PerceptualExtractor& phi) {
  require(!phi.is_empty(), ErrorCode::ExtractorUnavailable, "perceptual extractor not loaded");
  require_same(i_tar, i_ger, "loss_perceptual");
  return batch_sum_of_means((phi(i_ger) - phi(i_tar)).abs());
}

double loss_perceptual(const ImageTensor& i_tar, const ImageTensor& i_ger, PerceptualExtractor& phi) {
  torch::NoGradGuard guard;
  return loss_perceptual(i_tar.batched(), i_ger.batched(), phi).item<double>();
}

LossBreakdown loss_pt(const torch::Tensor& i_tar, const torch::Tensor& i_ger, const DiscriminatorScores& real,
                      const DiscriminatorScores& fake, const std::array<double, 3>& lambda, GanRole role,
                      PerceptualExtractor* phi, bool non_saturating) {
  LossBreakdown out;
  if (role == GanRole::Discriminator) {
    out.add(component::kGan, -loss_gan(real, fake, role), lambda[0]);
    return out;
  }
  out.add(component::kGan, loss_gan(real, fake, role, non_saturating), lambda[0]);
  out.add(component::kL1Transfer, loss_l1_transfer(i_tar, i_ger), lambda[1]);
  if (phi != nullptr && !phi->is_empty()) {
    out.add(component::kPerceptual, loss_perceptual(i_tar, i_ger, *phi), lambda[2]);
  }
  return out;
}

LossBreakdown loss_sht(const std::vector<PairLoss>& labeled, const std::vector<PairLoss>& unlabeled) {
  LossBreakdown out;
  for (const auto& p : labeled) {
    out += p.dh;
    out += p.pt_jk;
    out += p.pt_kj;
  }
  for (const auto& p : unlabeled) {
    require(!p.dh.has(component::kHeatmapMse) || p.dh.component(component::kHeatmapMse) == 0.0,
            ErrorCode::InvalidArgument, "unlabeled pair carries a heatmap term");
    out += p.dh;
    out += p.pt_jk;
    out += p.pt_kj;
  }
  return out;
}

}  // namespace sht
