#include "sht/inference.hpp"

#include "sht/heatmap.hpp"
#include "sht/resample.hpp"
#include "sht/sampling.hpp"

namespace sht {

EvalView prepare_eval_view(const AnnotatedFace& face, const ImageTensor& image, const SHTConfig& cfg) {
  require(face.landmarks.bbox().has_value(), ErrorCode::MissingAnnotation, face.name + ": no bounding box");
  const int s = cfg.sr_output_size;
  const auto t = crop_transform(*face.landmarks.bbox(), Augmentation{}, s, cfg.crop_margin);
  auto hr = ImageTensor::clamped(warp_affine(image.data(), t.inverse(), s, s), ImageRole::HR);
  auto lr = degrade(hr, cfg);
  return EvalView{std::move(lr), std::move(hr), t};
}

ImageTensor to_network_input(const ImageTensor& image, const SHTConfig& cfg) {
  require(image.channels() == 3, ErrorCode::ShapeMismatch, "network input must be RGB");
  if (image.height() == cfg.input_size && image.width() == cfg.input_size) return image.with_role(ImageRole::LR);
  return ImageTensor::clamped(resize_bicubic(image.data(), cfg.input_size, cfg.input_size), ImageRole::LR);
}

LandmarkSet predict_heatmap_landmarks(DHLN& model, const ImageTensor& lr) {
  auto out = dhln_forward(model, lr);
  return decode_heatmaps(out.heatmaps.back().squeeze(0)).landmarks;
}

LandmarkSet heatmap_to_image(const LandmarkSet& heatmap_landmarks, const SHTConfig& cfg, int width, int height) {
  std::vector<Point2> pts;
  pts.reserve(heatmap_landmarks.size());
  for (const auto& p : heatmap_landmarks.points()) {
    pts.push_back({rescale_coordinate(p.x, cfg.heatmap_size, width), rescale_coordinate(p.y, cfg.heatmap_size, height)});
  }
  return LandmarkSet(std::move(pts));
}

LandmarkSet predict_face(DHLN& model, const AnnotatedFace& face, const ImageTensor& image, const SHTConfig& cfg,
                         EvalRecord* quality) {
  auto view = prepare_eval_view(face, image, cfg);
  auto out = dhln_forward(model, view.lr);
  auto grid = decode_heatmaps(out.heatmaps.back().squeeze(0)).landmarks;
  auto crop = heatmap_to_image(grid, cfg, cfg.sr_output_size, cfg.sr_output_size);
  auto source = crop.transformed(view.source_to_crop.inverse());
  if (quality) {
    auto sr = ImageTensor::clamped(out.sr_image.squeeze(0), ImageRole::SR);
    quality->psnr = psnr_y(sr, view.hr);
    quality->ssim = ssim_y(sr, view.hr);
  }
  return LandmarkSet(source.points(), face.landmarks.bbox(), face.landmarks.interocular_indices());
}

EvalReport evaluate_model(DHLN& model, const std::vector<AnnotatedFace>& faces, const SHTConfig& cfg,
                          const EvalOptions& options) {
  std::vector<EvalRecord> records;
  records.reserve(faces.size());
  for (const auto& face : faces) {
    EvalRecord r;
    r.name = face.name;
    auto pred = predict_face(model, face, face.load_image(), cfg, options.image_quality ? &r : nullptr);
    r.nme = nme(pred, face.landmarks, options.kind);
    records.push_back(std::move(r));
  }
  return summarize(std::move(records), options.kind, options.auc_threshold, options.fr_threshold);
}

EvalReport evaluate_predictions(const std::map<std::string, LandmarkSet>& predictions,
                                const std::vector<AnnotatedFace>& faces, const EvalOptions& options) {
  std::vector<EvalRecord> records;
  for (const auto& face : faces) {
    auto it = predictions.find(face.name);
    require(it != predictions.end(), ErrorCode::MissingAnnotation, face.name + ": no prediction");
    records.push_back(EvalRecord{face.name, nme(it->second, face.landmarks, options.kind), std::nullopt, std::nullopt});
  }
  return summarize(std::move(records), options.kind, options.auc_threshold, options.fr_threshold);
}

}  // namespace sht
