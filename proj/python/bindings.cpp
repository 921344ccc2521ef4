#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <torch/torch.h>

#include "sht/checkpoint.hpp"
#include "sht/config.hpp"
#include "sht/data.hpp"
#include "sht/dhln.hpp"
#include "sht/heatmap.hpp"
#include "sht/image_io.hpp"
#include "sht/inference.hpp"
#include "sht/losses.hpp"
#include "sht/metrics.hpp"

namespace py = pybind11;
using namespace sht;

namespace {

using FloatArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

torch::Tensor to_tensor(const FloatArray& a) {
  std::vector<std::int64_t> shape(a.shape(), a.shape() + a.ndim());
  return torch::from_blob(const_cast<double*>(a.data()), shape, torch::kFloat64).clone();
}

FloatArray to_array(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kFloat64).contiguous();
  std::vector<py::ssize_t> shape(c.sizes().begin(), c.sizes().end());
  FloatArray out(shape);
  std::memcpy(out.mutable_data(), c.data_ptr<double>(), sizeof(double) * c.numel());
  return out;
}

// HWC in [0,1] on the Python side, CHW inside.
ImageTensor image_from_hwc(const FloatArray& a, ImageRole role) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("expected an H×W×3 array");
  return ImageTensor(to_tensor(a).permute({2, 0, 1}).contiguous(), role);
}

FloatArray image_to_hwc(const ImageTensor& img) { return to_array(img.data().permute({1, 2, 0})); }

std::vector<Point2> points_from(const FloatArray& a) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw py::value_error("expected an L×2 array");
  std::vector<Point2> pts(a.shape(0));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) pts[i] = {a.at(i, 0), a.at(i, 1)};
  return pts;
}

FloatArray points_to(const std::vector<Point2>& pts) {
  FloatArray out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{2}});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    v(i, 0) = pts[i].x;
    v(i, 1) = pts[i].y;
  }
  return out;
}

LandmarkSet make_set(const FloatArray& pts, std::optional<std::array<double, 4>> bbox,
                     std::optional<std::pair<int, int>> interocular) {
  std::optional<BBox> b;
  if (bbox) b = BBox{(*bbox)[0], (*bbox)[1], (*bbox)[2], (*bbox)[3]};
  std::optional<IndexPair> io;
  if (interocular) io = IndexPair{interocular->first, interocular->second};
  return LandmarkSet(points_from(pts), b, io);
}

// Inference-only view of a trained checkpoint.
class Model {
 public:
  explicit Model(const std::filesystem::path& checkpoint) : cfg_(), net_(nullptr) {
    const auto ckpt = read_checkpoint(checkpoint);
    cfg_ = ckpt.config();
    require(ckpt.has_section("dhln"), ErrorCode::CheckpointMismatch, "checkpoint has no DHLN weights");
    net_ = DHLN(cfg_);
    load_module_state(*net_, ckpt.sections.at("dhln"), "dhln");
    net_->eval();
  }

  FloatArray detect(const FloatArray& image) {
    const auto img = image_from_hwc(image, ImageRole::LR);
    const auto hm = predict_heatmap_landmarks(net_, to_network_input(img, cfg_));
    return points_to(heatmap_to_image(hm, cfg_, img.width(), img.height()).points());
  }

  FloatArray hallucinate(const FloatArray& image) {
    const auto out = dhln_forward(net_, to_network_input(image_from_hwc(image, ImageRole::LR), cfg_));
    return image_to_hwc(ImageTensor::clamped(out.sr_image[0], ImageRole::SR));
  }

  std::string config_text() const { return config_to_text(cfg_); }

 private:
  SHTConfig cfg_;
  DHLN net_;
};

}  // namespace

PYBIND11_MODULE(_sht, m) {
  m.doc() = "Super-resolution guided face alignment: metrics, heatmaps, toy data and inference";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (std::string(to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  m.def("toy_config_text", [] { return config_to_text(toy_config()); });
  m.def("reference_config_text", [] { return config_to_text(reference_config_256()); });
  m.def("normalize_config", [](const std::string& text) { return config_to_text(validate_config(parse_config(text))); },
        py::arg("text"), "Parses, validates and reprints a configuration.");

  m.def("render_heatmaps",
        [](const FloatArray& pts, int height, int width, double sigma) {
          return to_array(render_heatmaps(LandmarkSet(points_from(pts)), height, width, sigma).maps());
        },
        py::arg("landmarks"), py::arg("height"), py::arg("width"), py::arg("sigma"));
  m.def("decode_heatmaps",
        [](const FloatArray& maps) { return points_to(decode_heatmaps(to_tensor(maps)).landmarks.points()); },
        py::arg("maps"));

  m.def("nme",
        [](const FloatArray& pred, const FloatArray& gt, const std::string& kind,
           std::optional<std::array<double, 4>> bbox, std::optional<std::pair<int, int>> interocular) {
          return nme(LandmarkSet(points_from(pred)), make_set(gt, bbox, interocular), parse_normalization(kind));
        },
        py::arg("pred"), py::arg("gt"), py::arg("kind") = "io", py::arg("bbox") = py::none(),
        py::arg("interocular") = py::none());
  m.def("ced_auc", &ced_auc, py::arg("errors"), py::arg("threshold"));
  m.def("failure_rate", &failure_rate, py::arg("errors"), py::arg("threshold"));
  m.def("psnr_y",
        [](const FloatArray& a, const FloatArray& b) {
          return psnr_y(image_from_hwc(a, ImageRole::HR), image_from_hwc(b, ImageRole::SR));
        },
        py::arg("a"), py::arg("b"));
  m.def("ssim_y",
        [](const FloatArray& a, const FloatArray& b) {
          return ssim_y(image_from_hwc(a, ImageRole::HR), image_from_hwc(b, ImageRole::SR));
        },
        py::arg("a"), py::arg("b"));
  m.def("gradient_map", [](const FloatArray& image) { return image_to_hwc(gradient_map(image_from_hwc(image, ImageRole::HR))); },
        py::arg("image"));

  m.def("toy_faces",
        [](int n, int canvas, int num_landmarks, std::uint64_t seed) {
          py::list out;
          for (const auto& f : generate_toy_dataset(n, canvas, num_landmarks, ToyRanges{}, seed)) {
            const auto b = *f.landmarks.bbox();
            out.append(py::make_tuple(image_to_hwc(f.load_image()), points_to(f.landmarks.points()),
                                      py::make_tuple(b.x0, b.y0, b.w, b.h)));
          }
          return out;
        },
        py::arg("n"), py::arg("canvas") = 128, py::arg("num_landmarks") = 5, py::arg("seed") = 0,
        "List of (image H×W×3, landmarks L×2, bbox (x0, y0, w, h)).");

  m.def("read_image", [](const std::filesystem::path& p) { return image_to_hwc(read_image(p)); }, py::arg("path"));

  py::class_<Model>(m, "Model")
      .def(py::init<const std::filesystem::path&>(), py::arg("checkpoint"))
      .def("detect", &Model::detect, py::arg("image"), "Landmarks in input-image pixels.")
      .def("hallucinate", &Model::hallucinate, py::arg("image"), "Super-resolved face, H×W×3 in [0,1].")
      .def_property_readonly("config", &Model::config_text);
}
