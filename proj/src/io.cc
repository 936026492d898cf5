#include "bifocal/io.h"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bifocal/error.h"

namespace bifocal {
namespace {

using nlohmann::json;

template <typename M>
json RowMajor(const M& m) {
  json out = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

template <typename M>
M FromRowMajor(const json& j) {
  M m;
  if (!j.is_array() || j.size() != static_cast<std::size_t>(m.rows() * m.cols())) {
    throw Error(ErrorCode::kInvalidArgument, "wrong number of matrix entries");
  }
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) m(r, c) = j.at(r * m.cols() + c).template get<double>();
  }
  return m;
}

std::string Dump(const json& j) { return j.dump(2) + "\n"; }

template <typename F>
auto Parse(const std::string& text, F&& build) {
  try {
    return build(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed document: ") + e.what());
  }
}

const char* LayoutName(Layout l) {
  switch (l) {
    case Layout::kCollinear: return "collinear";
    case Layout::kGeneral: return "general";
    case Layout::kMixed: return "mixed";
  }
  return "";
}

Layout LayoutFromName(const std::string& s) {
  if (s == "collinear") return Layout::kCollinear;
  if (s == "general") return Layout::kGeneral;
  if (s == "mixed") return Layout::kMixed;
  throw Error(ErrorCode::kInvalidArgument, "unknown layout " + s);
}

const char* KindName(TensorKind k) { return k == TensorKind::kEssential ? "essential" : "fundamental"; }

TensorKind KindFromName(const std::string& s) {
  if (s == "essential") return TensorKind::kEssential;
  if (s == "fundamental") return TensorKind::kFundamental;
  throw Error(ErrorCode::kInvalidArgument, "unknown tensor kind " + s);
}

json TrackJson(const Track& t) {
  json points = json::array();
  for (const Vec3& p : t.points) points.push_back({p(0), p(1), p(2)});
  return {{"view_ids", t.view_ids}, {"points", points}};
}

Track TrackFromJson(const json& j) {
  Track t;
  t.view_ids = j.at("view_ids").get<std::vector<int>>();
  for (const json& p : j.at("points")) t.points.push_back(FromRowMajor<Vec3>(p));
  ValidateTrack(t);
  return t;
}

void PutOptional(json& j, const char* key, const std::optional<double>& v) {
  if (v) j[key] = *v;
}

std::optional<double> GetOptional(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

std::string SceneToJson(const Scene& scene) {
  json cameras = json::array();
  for (const Camera& c : scene.cameras) {
    cameras.push_back({{"K", RowMajor(c.intrinsics())},
                       {"R", RowMajor(c.rotation())},
                       {"t", RowMajor(c.center())}});
  }
  json points = json::array();
  for (const Vec3& p : scene.points) points.push_back({p(0), p(1), p(2)});
  return Dump({{"layout", LayoutName(scene.layout)},
               {"collinear_fraction", scene.collinear_fraction},
               {"seed", scene.seed},
               {"intrinsics", scene.intrinsics == IntrinsicsMode::kCalibrated ? "calibrated" : "varied"},
               {"collinear_ids", scene.collinear_ids},
               {"cameras", cameras},
               {"points", points}});
}

Scene SceneFromJson(const std::string& text) {
  return Parse(text, [](const json& j) {
    Scene s;
    s.layout = LayoutFromName(j.value("layout", "collinear"));
    s.collinear_fraction = j.value("collinear_fraction", 0.0);
    s.seed = j.value("seed", std::uint64_t{0});
    s.intrinsics = j.value("intrinsics", "calibrated") == "varied" ? IntrinsicsMode::kVaried
                                                                   : IntrinsicsMode::kCalibrated;
    s.collinear_ids = j.value("collinear_ids", std::vector<int>{});
    for (const json& c : j.at("cameras")) {
      s.cameras.emplace_back(FromRowMajor<Mat3>(c.at("K")), FromRowMajor<Mat3>(c.at("R")),
                             FromRowMajor<Vec3>(c.at("t")));
    }
    for (const json& p : j.at("points")) s.points.push_back(FromRowMajor<Vec3>(p));
    return s;
  });
}

std::string MeasurementsToJson(const Measurements& m) {
  json edges = json::array();
  for (const auto& [key, block] : m.tensors.blocks()) {
    edges.push_back({{"i", key.first}, {"j", key.second}, {"tensor", RowMajor(block)}});
  }
  json tracks = json::array();
  for (const Track& t : m.tracks) tracks.push_back(TrackJson(t));
  return Dump({{"n", m.tensors.n()},
               {"kind", KindName(m.tensors.kind())},
               {"edges", edges},
               {"tracks", tracks}});
}

Measurements MeasurementsFromJson(const std::string& text) {
  return Parse(text, [](const json& j) {
    Measurements m;
    std::vector<BlockEntry> blocks;
    for (const json& e : j.at("edges")) {
      blocks.push_back({e.at("i").get<int>(), e.at("j").get<int>(), FromRowMajor<Mat3>(e.at("tensor"))});
    }
    AssembleOptions options;
    options.normalize = false;
    options.validate_rank = false;
    m.tensors = NViewBifocal::Assemble(j.at("n").get<int>(), KindFromName(j.at("kind")), blocks, options);
    for (const json& t : j.at("tracks")) m.tracks.push_back(TrackFromJson(t));
    return m;
  });
}

std::string CamerasToJson(const CameraSet& cameras) {
  json list = json::array();
  for (std::size_t i = 0; i < cameras.projections.size(); ++i) {
    json c = {{"id", i}, {"recovered", static_cast<bool>(cameras.recovered[i])}};
    c["P"] = cameras.recovered[i] ? RowMajor(cameras.projections[i]) : json(nullptr);
    list.push_back(c);
  }
  return Dump({{"frame", cameras.frame == Frame::kEuclidean ? "euclidean" : "projective"},
               {"cameras", list}});
}

CameraSet CamerasFromJson(const std::string& text) {
  return Parse(text, [](const json& j) {
    CameraSet out;
    const std::string frame = j.at("frame");
    if (frame != "euclidean" && frame != "projective") {
      throw Error(ErrorCode::kInvalidArgument, "unknown frame " + frame);
    }
    out.frame = frame == "euclidean" ? Frame::kEuclidean : Frame::kProjective;
    for (const json& c : j.at("cameras")) {
      const bool ok = c.at("recovered").get<bool>();
      out.recovered.push_back(ok);
      out.projections.push_back(ok ? FromRowMajor<Mat34>(c.at("P")) : Mat34::Zero());
    }
    return out;
  });
}

std::string ReportToJson(const EvalReport& r) {
  json j = {{"algorithm", r.algorithm},
            {"regime", r.regime},
            {"n_cameras", r.n_cameras},
            {"n_reconstructed", r.n_reconstructed},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"n_triplets", r.n_triplets},
            {"n_virtual", r.n_virtual}};
  PutOptional(j, "mean_position_error", r.mean_position_error);
  PutOptional(j, "median_position_error", r.median_position_error);
  PutOptional(j, "mean_reprojection_error", r.mean_reprojection_error);
  if (!r.failure_stage.empty()) {
    j["failure_stage"] = r.failure_stage;
    j["failure_message"] = r.failure_message;
  }
  PutOptional(j, "runtime_seconds", r.runtime_seconds);
  return Dump(j);
}

EvalReport ReportFromJson(const std::string& text) {
  return Parse(text, [](const json& j) {
    EvalReport r;
    r.algorithm = j.at("algorithm");
    r.regime = j.at("regime");
    r.n_cameras = j.at("n_cameras");
    r.n_reconstructed = j.at("n_reconstructed");
    r.iterations = j.value("iterations", 0);
    r.converged = j.value("converged", false);
    r.n_triplets = j.value("n_triplets", 0);
    r.n_virtual = j.value("n_virtual", 0);
    r.mean_position_error = GetOptional(j, "mean_position_error");
    r.median_position_error = GetOptional(j, "median_position_error");
    r.mean_reprojection_error = GetOptional(j, "mean_reprojection_error");
    r.failure_stage = j.value("failure_stage", "");
    r.failure_message = j.value("failure_message", "");
    r.runtime_seconds = GetOptional(j, "runtime_seconds");
    return r;
  });
}

std::string CoverToJson(const TripletCover& cover) {
  json virtual_nodes = json::array();
  for (const auto& [triplet, id] : cover.virtual_nodes) {
    virtual_nodes.push_back({{"triplet", triplet}, {"camera", id}});
  }
  json dual = json::array();
  for (const auto& [a, b] : cover.dual_edges) dual.push_back({a, b});
  return Dump({{"triplets", cover.triplets}, {"dual_edges", dual}, {"virtual_nodes", virtual_nodes}});
}

TripletCover CoverFromJson(const std::string& text) {
  return Parse(text, [](const json& j) {
    std::vector<Triplet> triplets;
    for (const json& t : j.at("triplets")) {
      const auto v = t.get<std::vector<int>>();
      if (v.size() != 3) throw Error(ErrorCode::kInvalidArgument, "triplet needs three cameras");
      triplets.push_back(MakeTriplet(v[0], v[1], v[2]));
    }
    TripletCover cover = MakeCover(std::move(triplets));
    for (const json& v : j.value("virtual_nodes", json::array())) {
      const auto t = v.at("triplet").get<std::vector<int>>();
      if (t.size() != 3) throw Error(ErrorCode::kInvalidArgument, "triplet needs three cameras");
      cover.virtual_nodes[MakeTriplet(t[0], t[1], t[2])] = v.at("camera").get<int>();
    }
    return cover;
  });
}

std::string ReadTextFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteTextFile(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::kInvalidArgument, "failed writing " + path);
}

}  // namespace bifocal
