#include <optional>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bifocal/error.h"
#include "bifocal/io.h"
#include "bifocal/nview.h"
#include "bifocal/pipeline.h"
#include "bifocal/projection.h"
#include "bifocal/synthetic.h"

namespace py = pybind11;
using namespace bifocal;

namespace {

template <typename E>
E Parse(const std::string& name, std::initializer_list<std::pair<const char*, E>> options) {
  for (const auto& [key, value] : options) {
    if (name == key) return value;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown option '" + name + "'");
}

TensorKind ParseKind(const std::string& s) {
  return Parse<TensorKind>(s, {{"essential", TensorKind::kEssential}, {"fundamental", TensorKind::kFundamental}});
}

py::object Loads(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

py::dict CertificateDict(const ConsistencyCertificate& c) {
  py::dict d;
  d["eigenvalues"] = c.eigenvalues;
  d["rank"] = c.rank_estimate;
  d["signature"] = c.signature;
  d["block_row_ranks"] = c.block_row_ranks;
  d["pattern_residual"] = c.pattern_residual;
  d["orthogonality_residual"] = c.orthogonality_residual;
  d["block_rotation_residual"] = c.block_rotation_residual;
  d["condition1"] = c.condition1;
  d["condition2"] = c.condition2;
  d["passed"] = c.pass;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bifocal tensor averaging for collinear camera setups";
  py::register_exception<Error>(m, "BifocalError", PyExc_RuntimeError);

  py::class_<Scene>(m, "Scene")
      .def_static("from_json", &SceneFromJson)
      .def("to_json", &SceneToJson)
      .def_property_readonly("n_cams", [](const Scene& s) { return s.cameras.size(); })
      .def_property_readonly("collinear_ids", [](const Scene& s) { return s.collinear_ids; })
      .def_property_readonly("centers",
                             [](const Scene& s) {
                               Eigen::MatrixXd c(s.cameras.size(), 3);
                               for (std::size_t i = 0; i < s.cameras.size(); ++i) {
                                 c.row(i) = s.cameras[i].center().transpose();
                               }
                               return c;
                             })
      .def("projection", [](const Scene& s, int i) { return s.cameras.at(i).projection(); })
      .def("consistent_dense", [](const Scene& s) { return ConsistentDense(s.cameras); });

  py::class_<Measurements>(m, "Measurements")
      .def_static("from_json", &MeasurementsFromJson)
      .def("to_json", &MeasurementsToJson)
      .def_property_readonly("n", [](const Measurements& x) { return x.tensors.n(); })
      .def_property_readonly("kind",
                             [](const Measurements& x) {
                               return x.tensors.kind() == TensorKind::kEssential ? "essential" : "fundamental";
                             })
      .def_property_readonly("edges", [](const Measurements& x) { return x.tensors.Edges(); })
      .def_property_readonly("n_tracks", [](const Measurements& x) { return x.tracks.size(); })
      .def("block", [](const Measurements& x, int i, int j) { return x.tensors.Block(i, j); })
      .def("dense", [](const Measurements& x) { return x.tensors.Dense(); });

  m.def(
      "generate_scene",
      [](const std::string& layout, int n_cams, int n_points, std::uint64_t seed,
         const std::string& intrinsics, double collinear_fraction) {
        SceneSpec spec;
        spec.layout = Parse<Layout>(
            layout, {{"collinear", Layout::kCollinear}, {"general", Layout::kGeneral}, {"mixed", Layout::kMixed}});
        spec.n_cams = n_cams;
        spec.n_points = n_points;
        spec.seed = seed;
        spec.intrinsics = Parse<IntrinsicsMode>(
            intrinsics, {{"calibrated", IntrinsicsMode::kCalibrated}, {"varied", IntrinsicsMode::kVaried}});
        spec.collinear_fraction = collinear_fraction;
        return GenerateScene(spec);
      },
      py::arg("layout") = "collinear", py::arg("n_cams") = 10, py::arg("n_points") = 50, py::arg("seed") = 0,
      py::arg("intrinsics") = "calibrated", py::arg("collinear_fraction") = 0.5);

  m.def(
      "measure",
      [](const Scene& scene, const std::string& kind, double rotation_deg, double translation_dir_deg,
         double pixel, double matrix_sigma, int max_gap, std::uint64_t seed) {
        NoiseSpec noise;
        noise.rotation_deg = rotation_deg;
        noise.translation_dir_deg = translation_dir_deg;
        noise.pixel = pixel;
        noise.matrix_sigma = matrix_sigma;
        noise.max_gap = max_gap;
        noise.seed = seed;
        return Measure(scene, ParseKind(kind), noise);
      },
      py::arg("scene"), py::arg("kind") = "essential", py::arg("rotation_deg") = 0.0,
      py::arg("translation_dir_deg") = 0.0, py::arg("pixel") = 0.0, py::arg("matrix_sigma") = 0.0,
      py::arg("max_gap") = 0, py::arg("seed") = 0);

  m.def(
      "certify",
      [](const Eigen::MatrixXd& dense, const std::string& regime) {
        if (regime == "collinear-essential") return CertificateDict(CertifyCollinearEssential(dense));
        if (regime == "collinear-fundamental") return CertificateDict(CertifyCollinearFundamental(dense));
        if (regime == "general-essential") return CertificateDict(CertifyGeneral(dense, TensorKind::kEssential));
        if (regime == "general-fundamental") {
          return CertificateDict(CertifyGeneral(dense, TensorKind::kFundamental));
        }
        throw Error(ErrorCode::kInvalidArgument, "unknown regime '" + regime + "'");
      },
      py::arg("dense"), py::arg("regime"));

  m.def(
      "project",
      [](const Eigen::MatrixXd& s, const std::string& setting, const std::string& kind, double rank_tol) {
        const Setting st =
            Parse<Setting>(setting, {{"collinear", Setting::kCollinear}, {"general", Setting::kGeneral}});
        return ProjectTriplet(s, st, ParseKind(kind), rank_tol).matrix;
      },
      py::arg("matrix"), py::arg("setting"), py::arg("kind"), py::arg("rank_tol") = 1e-6);

  m.def(
      "run_pipeline",
      [](const Measurements& measurements, std::optional<Scene> scene, const std::string& algorithm,
         const std::string& regime, int max_iters, double tol, int threads, double collinearity_threshold) {
        PipelineConfig config;
        config.algorithm = Parse<Algorithm>(algorithm, {{"r4", Algorithm::kR4}, {"vc", Algorithm::kVC}});
        config.calibration = Parse<Calibration>(
            regime, {{"calibrated", Calibration::kCalibrated}, {"uncalibrated", Calibration::kUncalibrated}});
        config.admm.max_iters = max_iters;
        config.admm.primal_tol = config.admm.dual_tol = tol;
        config.admm.threads = threads;
        config.collinearity_threshold = collinearity_threshold;
        PipelineResult r;
        {
          py::gil_scoped_release release;
          r = RunPipeline(measurements, scene ? &*scene : nullptr, config);
        }
        py::dict out;
        out["report"] = Loads(ReportToJson(r.report));
        out["cameras"] = Loads(CamerasToJson(r.cameras));
        out["cover"] = Loads(CoverToJson(r.cover));
        py::list log;
        for (const IterationRecord& rec : r.log) log.append(Loads(FormatRecord(rec)));
        out["log"] = log;
        out["runtime_seconds"] = r.runtime_seconds;
        return out;
      },
      py::arg("measurements"), py::arg("scene") = py::none(), py::arg("algorithm") = "r4",
      py::arg("regime") = "calibrated", py::arg("max_iters") = 500, py::arg("tol") = 1e-9, py::arg("threads") = 1,
      py::arg("collinearity_threshold") = 0.05);
}
