#include "uscal/config.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>

#include <spdlog/spdlog.h>

#include "uscal/error.hpp"
#include "uscal/io.hpp"

namespace uscal {

namespace {

// Strict view of one JSON object: unknown keys and wrong types are
// ConfigErrors, missing keys fall back to the caller's default.
class Block {
 public:
  Block(const Json& j, std::string path, std::initializer_list<std::string_view> keys)
      : j_(j), path_(std::move(path)) {
    if (!j.is_object()) fail(path_, "must be an object");
    for (const auto& [key, value] : j.items()) {
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) fail(where(key), "unknown key");
    }
  }

  [[nodiscard]] bool has(std::string_view key) const { return j_.contains(key); }
  [[nodiscard]] const Json& at(std::string_view key) const { return j_.at(std::string(key)); }
  [[nodiscard]] std::string where(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  [[nodiscard]] double number(std::string_view key, double def) const {
    if (!has(key)) return def;
    const Json& v = at(key);
    if (!v.is_number()) fail(where(key), "must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(where(key), "must be finite");
    return d;
  }

  [[nodiscard]] int integer(std::string_view key, int def) const {
    if (!has(key)) return def;
    const Json& v = at(key);
    if (!v.is_number_integer()) fail(where(key), "must be an integer");
    const auto i = v.get<long long>();
    if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max()) fail(where(key), "out of range");
    return static_cast<int>(i);
  }

  [[nodiscard]] bool boolean(std::string_view key, bool def) const {
    if (!has(key)) return def;
    if (!at(key).is_boolean()) fail(where(key), "must be true or false");
    return at(key).get<bool>();
  }

  [[nodiscard]] std::string string(std::string_view key, const std::string& def) const {
    if (!has(key)) return def;
    if (!at(key).is_string()) fail(where(key), "must be a string");
    return at(key).get<std::string>();
  }

  [[nodiscard]] std::vector<double> numbers(std::string_view key, const std::vector<double>& def) const {
    if (!has(key)) return def;
    const Json& v = at(key);
    if (!v.is_array()) fail(where(key), "must be an array of numbers");
    std::vector<double> out;
    for (const Json& e : v) {
      if (!e.is_number()) fail(where(key), "must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  [[nodiscard]] std::vector<int> integers(std::string_view key, const std::vector<int>& def) const {
    if (!has(key)) return def;
    const Json& v = at(key);
    if (!v.is_array()) fail(where(key), "must be an array of integers");
    std::vector<int> out;
    for (const Json& e : v) {
      if (!e.is_number_integer()) fail(where(key), "must be an array of integers");
      out.push_back(e.get<int>());
    }
    return out;
  }

  [[nodiscard]] Vec3 vec3(std::string_view key, const Vec3& def) const {
    const auto v = numbers(key, {def.x(), def.y(), def.z()});
    if (v.size() != 3) fail(where(key), "must hold 3 numbers");
    return {v[0], v[1], v[2]};
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw Error(ErrorKind::ConfigError, where + ": " + what);
  }

 private:
  const Json& j_;
  std::string path_;
};

void require(bool ok, const std::string& where, const std::string& what) {
  if (!ok) Block::fail(where, what);
}

// Translates library validation errors into config errors naming the block.
template <class F>
void validated(const std::string& where, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    if (exit_code_for(e.kind()) != 2) throw;
    Block::fail(where, e.what());
  }
}

const Json kEmpty = Json::object();

const Json& sub(const Json& j, std::string_view key) {
  const auto it = j.find(key);
  return it == j.end() ? kEmpty : *it;
}

NWireParams read_phantom(const Json& j, const std::string& path) {
  const Block b(j, path, {"x_span_mm", "y_front_mm", "y_back_mm", "layer_depths_mm", "wire_diameter_mm"});
  NWireParams p;
  p.x_span = b.number("x_span_mm", p.x_span);
  p.y_front = b.number("y_front_mm", p.y_front);
  p.y_back = b.number("y_back_mm", p.y_back);
  p.layer_depths = b.numbers("layer_depths_mm", p.layer_depths);
  p.wire_diameter = b.number("wire_diameter_mm", p.wire_diameter);
  require(p.layer_depths.size() == 3, b.where("layer_depths_mm"), "needs 3 depths");
  validated(path, [&] { make_nwire_geometry(p); });
  return p;
}

MarkerParams read_marker(const Json& j, const std::string& path) {
  const Block b(j, path, {"cube_size_mm", "arrangement", "downsample_spacing_mm"});
  MarkerParams p;
  p.cube_size = b.number("cube_size_mm", p.cube_size);
  p.downsample_spacing = b.number("downsample_spacing_mm", p.downsample_spacing);
  if (b.has("arrangement")) {
    const Json& a = b.at("arrangement");
    require(a.is_array(), b.where("arrangement"), "must be a list of [i, j, k] cells");
    p.arrangement.clear();
    for (const Json& cell : a) {
      require(cell.is_array() && cell.size() == 3 &&
                  std::all_of(cell.begin(), cell.end(), [](const Json& c) { return c.is_number_integer(); }),
              b.where("arrangement"), "must be a list of [i, j, k] cells");
      p.arrangement.push_back({cell[0].get<int>(), cell[1].get<int>(), cell[2].get<int>()});
    }
  }
  require(p.cube_size > 0.0, b.where("cube_size_mm"), "must be > 0");
  require(p.downsample_spacing > 0.0, b.where("downsample_spacing_mm"), "must be > 0");
  validated(path, [&] { make_marker_mesh(p); });
  return p;
}

CameraIntrinsics read_camera(const Json& j, const std::string& path) {
  const Block b(j, path, {"fx", "fy", "cx", "cy", "width", "height"});
  CameraIntrinsics k;
  k.fx = b.number("fx", k.fx);
  k.fy = b.number("fy", k.fy);
  k.cx = b.number("cx", k.cx);
  k.cy = b.number("cy", k.cy);
  k.width = b.integer("width", k.width);
  k.height = b.integer("height", k.height);
  validated(path, [&] { k.validate(); });
  return k;
}

DepthNoiseModel read_depth_noise(const Json& j, const std::string& path) {
  const Block b(j, path, {"sigma0_mm", "sigma1_mm", "dropout_rate"});
  DepthNoiseModel n;
  n.sigma0 = b.number("sigma0_mm", n.sigma0);
  n.sigma1 = b.number("sigma1_mm", n.sigma1);
  n.dropout_rate = b.number("dropout_rate", n.dropout_rate);
  validated(path, [&] { n.validate(); });
  return n;
}

const std::initializer_list<std::string_view> kImageKeys = {"sx_mm_per_px", "sy_mm_per_px", "width", "height"};

ImageGeometry read_image(const Block& b, const std::string& path) {
  ImageGeometry g;
  g.sx = b.number("sx_mm_per_px", g.sx);
  g.sy = b.number("sy_mm_per_px", g.sy);
  g.width = b.integer("width", g.width);
  g.height = b.integer("height", g.height);
  validated(path, [&] { g.validate(); });
  return g;
}

struct Ultrasound {
  ImageGeometry image;
  double psf_sigma_px = 3.0;
  SpeckleParams speckle;
};

Ultrasound read_ultrasound(const Json& j, const std::string& path) {
  const Block b(j, path,
                {"sx_mm_per_px", "sy_mm_per_px", "width", "height", "psf_sigma_px", "speckle_mean", "speckle_sigma"});
  Ultrasound u;
  u.image = read_image(b, path);
  u.psf_sigma_px = b.number("psf_sigma_px", u.psf_sigma_px);
  u.speckle.mean = b.number("speckle_mean", u.speckle.mean);
  u.speckle.sigma = b.number("speckle_sigma", u.speckle.sigma);
  require(u.psf_sigma_px > 0.0, b.where("psf_sigma_px"), "must be > 0");
  require(u.speckle.mean >= 0.0 && u.speckle.sigma >= 0.0, path, "speckle parameters must be >= 0");
  return u;
}

RigidTransform read_true_calibration(const Json& j, const std::string& path, const RigidTransform& def) {
  const Block b(j, path, {"rotation_euler_deg", "translation_mm"});
  const EulerZyx e = euler_zyx(def.rotation);
  const Vec3 euler = b.vec3("rotation_euler_deg", Vec3(rad2deg(e.roll), rad2deg(e.pitch), rad2deg(e.yaw)));
  RigidTransform t;
  t.rotation = b.has("rotation_euler_deg")
                   ? from_euler_zyx(deg2rad(euler.x()), deg2rad(euler.y()), deg2rad(euler.z()))
                   : def.rotation;
  t.translation = b.vec3("translation_mm", def.translation);
  return t;
}

IcpParams read_icp(const Json& j, const std::string& path) {
  const Block b(j, path,
                {"max_iterations", "convergence_delta_rms_mm", "max_correspondence_distance_mm",
                 "model_downsample_spacing_mm", "surface_iterations", "surface_convergence_delta_mm",
                 "cull_back_faces"});
  IcpParams p;
  p.max_iterations = b.integer("max_iterations", p.max_iterations);
  p.convergence_delta_rms = b.number("convergence_delta_rms_mm", p.convergence_delta_rms);
  p.max_correspondence_distance = b.number("max_correspondence_distance_mm", p.max_correspondence_distance);
  p.model_downsample_spacing = b.number("model_downsample_spacing_mm", p.model_downsample_spacing);
  p.surface_iterations = b.integer("surface_iterations", p.surface_iterations);
  p.surface_convergence_delta = b.number("surface_convergence_delta_mm", p.surface_convergence_delta);
  p.cull_back_faces = b.boolean("cull_back_faces", p.cull_back_faces);
  validated(path, [&] { p.validate(); });
  return p;
}

SegmentationParams read_segmentation(const Json& j, const std::string& path) {
  const Block b(j, path, {"threshold", "min_blob_px", "max_blob_px"});
  SegmentationParams p;
  p.threshold = b.number("threshold", p.threshold);
  p.min_blob_px = b.integer("min_blob_px", p.min_blob_px);
  p.max_blob_px = b.integer("max_blob_px", p.max_blob_px);
  require(p.threshold >= 0.0 && p.threshold < 255.0, b.where("threshold"), "must be in [0, 255)");
  require(p.min_blob_px >= 1 && p.max_blob_px >= p.min_blob_px, path, "blob size bounds are inconsistent");
  return p;
}

MatchParams read_match(const Json& j, const std::string& path) {
  const Block b(j, path, {"collinearity_tolerance_px", "front_at_low_u"});
  MatchParams p;
  p.collinearity_tolerance_px = b.number("collinearity_tolerance_px", p.collinearity_tolerance_px);
  p.front_at_low_u = b.boolean("front_at_low_u", p.front_at_low_u);
  require(p.collinearity_tolerance_px > 0.0, b.where("collinearity_tolerance_px"), "must be > 0");
  return p;
}

TrajectorySpec read_trajectory(const Json& j, const std::string& path) {
  const Block b(j, path, {"n_poses", "poses", "jitter_mm", "jitter_deg"});
  require(!(b.has("n_poses") && b.has("poses")), path, "give either n_poses or poses");
  const int n = b.integer("n_poses", 20);
  require(n >= 1, b.where("n_poses"), "must be >= 1");
  TrajectorySpec t = default_trajectory(n);
  if (b.has("poses")) {
    const Json& poses = b.at("poses");
    require(poses.is_array() && !poses.empty(), b.where("poses"), "must be a non-empty list");
    t.poses.clear();
    for (std::size_t i = 0; i < poses.size(); ++i) {
      const std::string where = b.where("poses") + "[" + std::to_string(i) + "]";
      const Block pb(poses[i], where, {"x0_mm", "about_u_deg", "about_v_deg", "about_n_deg"});
      ProbePose p;
      p.x0 = pb.number("x0_mm", p.x0);
      p.about_u_deg = pb.number("about_u_deg", p.about_u_deg);
      p.about_v_deg = pb.number("about_v_deg", p.about_v_deg);
      p.about_n_deg = pb.number("about_n_deg", p.about_n_deg);
      t.poses.push_back(p);
    }
  }
  t.jitter_mm = b.number("jitter_mm", t.jitter_mm);
  t.jitter_deg = b.number("jitter_deg", t.jitter_deg);
  require(t.jitter_mm >= 0.0 && t.jitter_deg >= 0.0, path, "jitter must be >= 0");
  return t;
}

BoardParams read_board(const Json& j, const std::string& path) {
  const Block b(j, path, {"size_mm", "square_size_mm", "square_offset_mm", "cube_size_mm", "cube_yaw_deg"});
  BoardParams p;
  p.size = b.number("size_mm", p.size);
  p.square_size = b.number("square_size_mm", p.square_size);
  p.square_offset = b.number("square_offset_mm", p.square_offset);
  p.cube_size = b.number("cube_size_mm", p.cube_size);
  p.cube_yaw_deg = b.number("cube_yaw_deg", p.cube_yaw_deg);
  require(p.size > 0.0 && p.square_size > 0.0 && p.cube_size > 0.0, path, "sizes must be > 0");
  require(p.square_offset + 0.5 * p.square_size <= 0.5 * p.size, path, "marker squares must lie on the board");
  validated(path, [&] { make_board(p).validate(); });
  return p;
}

SpotSource spot_source_from(const std::string& s, const std::string& where) {
  if (s == "segmented") return SpotSource::Segmented;
  if (s == "annotations") return SpotSource::Annotations;
  Block::fail(where, "must be \"segmented\" or \"annotations\"");
}

Json to_json(const IcpParams& p) {
  return Json{{"max_iterations", p.max_iterations},
              {"convergence_delta_rms_mm", p.convergence_delta_rms},
              {"max_correspondence_distance_mm", p.max_correspondence_distance},
              {"model_downsample_spacing_mm", p.model_downsample_spacing},
              {"surface_iterations", p.surface_iterations},
              {"surface_convergence_delta_mm", p.surface_convergence_delta},
              {"cull_back_faces", p.cull_back_faces}};
}

Json to_json(const TrajectorySpec& t) {
  Json poses = Json::array();
  for (const ProbePose& p : t.poses) {
    poses.push_back({{"x0_mm", p.x0},
                     {"about_u_deg", p.about_u_deg},
                     {"about_v_deg", p.about_v_deg},
                     {"about_n_deg", p.about_n_deg}});
  }
  return Json{{"poses", poses}, {"jitter_mm", t.jitter_mm}, {"jitter_deg", t.jitter_deg}};
}

}  // namespace

bool check_camera_distance(double mm, std::string_view what) {
  if (!(mm >= kMinDistanceMm && mm <= kMaxDistanceMm)) {
    throw Error(ErrorKind::ConfigError, std::string(what) + ": camera distance " + format_number(mm) +
                                            " mm is outside [300, 1000] mm");
  }
  if (mm < kWarnBelowMm || mm > kWarnAboveMm) {
    spdlog::warn("{}: camera distance {} mm is outside the 400-800 mm operating range", what, mm);
    return false;
  }
  return true;
}

ProcessingParams ExperimentConfig::processing() const {
  return {calibration.icp, calibration.segmentation, calibration.match};
}

ExperimentConfig ExperimentConfig::noiseless() {
  ExperimentConfig c;
  c.calibration = CalibrationScenario::noiseless();
  c.cube = CubeScenario::noiseless();
  return c;
}

Json to_json(const NWireParams& p) {
  return Json{{"x_span_mm", p.x_span},
              {"y_front_mm", p.y_front},
              {"y_back_mm", p.y_back},
              {"layer_depths_mm", p.layer_depths},
              {"wire_diameter_mm", p.wire_diameter}};
}

Json to_json(const MarkerParams& p) {
  Json cells = Json::array();
  for (const auto& c : p.arrangement) cells.push_back({c[0], c[1], c[2]});
  return Json{{"cube_size_mm", p.cube_size}, {"arrangement", cells}, {"downsample_spacing_mm", p.downsample_spacing}};
}

Json to_json(const CameraIntrinsics& k) {
  return Json{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

Json to_json(const ImageGeometry& g) {
  return Json{{"sx_mm_per_px", g.sx}, {"sy_mm_per_px", g.sy}, {"width", g.width}, {"height", g.height}};
}

NWireParams nwire_params_from_json(const Json& j) { return read_phantom(j, "phantom"); }
MarkerParams marker_params_from_json(const Json& j) { return read_marker(j, "marker"); }
CameraIntrinsics camera_from_json(const Json& j) { return read_camera(j, "camera"); }

ImageGeometry image_geometry_from_json(const Json& j) {
  const Block b(j, "image", kImageKeys);
  return read_image(b, "image");
}

ExperimentConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorKind::ConfigError, "config must be a JSON object");
  check_schema(j, schema::kConfig);
  const Block top(j, "",
                  {"schema", "seed", "phantom", "marker", "camera", "depth_noise", "ultrasound", "true_calibration",
                   "icp", "segmentation", "match", "calibration", "sweep", "cube"});

  ExperimentConfig c;
  if (top.has("seed")) {
    const Json& s = top.at("seed");
    require(s.is_number_unsigned(), "seed", "must be a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }

  CalibrationScenario& cal = c.calibration;
  CubeScenario& cube = c.cube;

  cal.phantom = read_phantom(sub(j, "phantom"), "phantom");
  cal.marker = read_marker(sub(j, "marker"), "marker");
  cube.marker = cal.marker;
  cal.camera = read_camera(sub(j, "camera"), "camera");
  cube.camera = cal.camera;
  cal.depth_noise = read_depth_noise(sub(j, "depth_noise"), "depth_noise");
  cube.depth_noise = cal.depth_noise;

  const Ultrasound us = read_ultrasound(sub(j, "ultrasound"), "ultrasound");
  cal.image = cube.image = us.image;
  cal.psf_sigma_px = cube.psf_sigma_px = us.psf_sigma_px;
  cal.speckle = cube.speckle = us.speckle;

  cal.t_marker_from_image =
      read_true_calibration(sub(j, "true_calibration"), "true_calibration", default_true_calibration(cal.marker));
  cube.t_marker_from_image = cal.t_marker_from_image;

  cal.icp = cube.icp = read_icp(sub(j, "icp"), "icp");
  cal.segmentation = cube.segmentation = read_segmentation(sub(j, "segmentation"), "segmentation");
  cal.match = read_match(sub(j, "match"), "match");

  {
    const Block b(sub(j, "calibration"), "calibration",
                  {"camera_distance_mm", "camera_elevation_deg", "camera_azimuth_deg", "trajectory",
                   "heldout_every", "operator_hint_error_deg"});
    cal.camera_distance_mm = b.number("camera_distance_mm", cal.camera_distance_mm);
    cal.camera_elevation_deg = b.number("camera_elevation_deg", cal.camera_elevation_deg);
    cal.camera_azimuth_deg = b.number("camera_azimuth_deg", cal.camera_azimuth_deg);
    cal.heldout_every = b.integer("heldout_every", cal.heldout_every);
    cal.operator_hint_error_deg = b.number("operator_hint_error_deg", cal.operator_hint_error_deg);
    cal.trajectory = read_trajectory(b.has("trajectory") ? b.at("trajectory") : kEmpty, b.where("trajectory"));
    check_camera_distance(cal.camera_distance_mm, b.where("camera_distance_mm"));
    require(cal.camera_elevation_deg > 0.0 && cal.camera_elevation_deg <= 90.0, b.where("camera_elevation_deg"),
            "must be in (0, 90]");
    require(cal.heldout_every == 0 || cal.heldout_every >= 2, b.where("heldout_every"), "must be 0 or >= 2");
    require(cal.operator_hint_error_deg >= 0.0, b.where("operator_hint_error_deg"), "must be >= 0");
  }

  {
    const Block b(sub(j, "sweep"), "sweep", {"distances_mm", "repeats"});
    c.sweep.distances_mm = b.numbers("distances_mm", c.sweep.distances_mm);
    c.sweep.repeats = b.integer("repeats", c.sweep.repeats);
    require(!c.sweep.distances_mm.empty(), b.where("distances_mm"), "needs at least one distance");
    require(c.sweep.repeats >= 2, b.where("repeats"), "needs at least 2 repeats");
    for (double d : c.sweep.distances_mm) check_camera_distance(d, b.where("distances_mm"));
  }

  {
    const Block b(sub(j, "cube"), "cube",
                  {"board", "edge_ids", "camera_distance_mm", "camera_elevation_deg", "camera_azimuth_deg",
                   "detection_sigma_px", "planes_per_edge", "sweep_tilt_deg", "operator_hint_error_deg",
                   "spot_source", "runs", "calibration_file", "calibrate_in_run"});
    cube.board = read_board(b.has("board") ? b.at("board") : kEmpty, b.where("board"));
    cube.edge_ids = b.integers("edge_ids", cube.edge_ids);
    validated(b.where("edge_ids"), [&] { make_cube_edges(cube.board.cube_size, cube.edge_ids); });
    require(!cube.edge_ids.empty(), b.where("edge_ids"), "needs at least one edge");
    cube.camera_distance_mm = b.number("camera_distance_mm", cube.camera_distance_mm);
    cube.camera_elevation_deg = b.number("camera_elevation_deg", cube.camera_elevation_deg);
    cube.camera_azimuth_deg = b.number("camera_azimuth_deg", cube.camera_azimuth_deg);
    cube.detection_sigma_px = b.number("detection_sigma_px", cube.detection_sigma_px);
    cube.planes_per_edge = b.integer("planes_per_edge", cube.planes_per_edge);
    cube.sweep_tilt_deg = b.number("sweep_tilt_deg", cube.sweep_tilt_deg);
    cube.operator_hint_error_deg = b.number("operator_hint_error_deg", cube.operator_hint_error_deg);
    cube.spot_source = spot_source_from(b.string("spot_source", "segmented"), b.where("spot_source"));
    c.cube_runs.runs = b.integer("runs", c.cube_runs.runs);
    c.cube_runs.calibration_file = b.string("calibration_file", c.cube_runs.calibration_file);
    c.cube_runs.calibrate_in_run = b.boolean("calibrate_in_run", c.cube_runs.calibrate_in_run);
    check_camera_distance(cube.camera_distance_mm, b.where("camera_distance_mm"));
    require(cube.camera_elevation_deg > 0.0 && cube.camera_elevation_deg <= 90.0, b.where("camera_elevation_deg"),
            "must be in (0, 90]");
    require(cube.detection_sigma_px >= 0.0, b.where("detection_sigma_px"), "must be >= 0");
    require(cube.planes_per_edge >= 2, b.where("planes_per_edge"), "must be >= 2");
    require(cube.operator_hint_error_deg >= 0.0, b.where("operator_hint_error_deg"), "must be >= 0");
    require(c.cube_runs.runs >= 1, b.where("runs"), "must be >= 1");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

Json to_json(const ExperimentConfig& c) {
  const CalibrationScenario& cal = c.calibration;
  const CubeScenario& cube = c.cube;
  const EulerZyx e = euler_zyx(cal.t_marker_from_image.rotation);
  const Vec3& t = cal.t_marker_from_image.translation;
  Json ultrasound = to_json(cal.image);
  ultrasound["psf_sigma_px"] = cal.psf_sigma_px;
  ultrasound["speckle_mean"] = cal.speckle.mean;
  ultrasound["speckle_sigma"] = cal.speckle.sigma;
  return Json{
      {"schema", schema::kConfig},
      {"seed", c.seed},
      {"phantom", to_json(cal.phantom)},
      {"marker", to_json(cal.marker)},
      {"camera", to_json(cal.camera)},
      {"depth_noise",
       {{"sigma0_mm", cal.depth_noise.sigma0},
        {"sigma1_mm", cal.depth_noise.sigma1},
        {"dropout_rate", cal.depth_noise.dropout_rate}}},
      {"ultrasound", ultrasound},
      {"true_calibration",
       {{"rotation_euler_deg", {rad2deg(e.roll), rad2deg(e.pitch), rad2deg(e.yaw)}},
        {"translation_mm", {t.x(), t.y(), t.z()}}}},
      {"icp", to_json(cal.icp)},
      {"segmentation",
       {{"threshold", cal.segmentation.threshold},
        {"min_blob_px", cal.segmentation.min_blob_px},
        {"max_blob_px", cal.segmentation.max_blob_px}}},
      {"match",
       {{"collinearity_tolerance_px", cal.match.collinearity_tolerance_px},
        {"front_at_low_u", cal.match.front_at_low_u}}},
      {"calibration",
       {{"camera_distance_mm", cal.camera_distance_mm},
        {"camera_elevation_deg", cal.camera_elevation_deg},
        {"camera_azimuth_deg", cal.camera_azimuth_deg},
        {"trajectory", to_json(cal.trajectory)},
        {"heldout_every", cal.heldout_every},
        {"operator_hint_error_deg", cal.operator_hint_error_deg}}},
      {"sweep", {{"distances_mm", c.sweep.distances_mm}, {"repeats", c.sweep.repeats}}},
      {"cube",
       {{"board",
         {{"size_mm", cube.board.size},
          {"square_size_mm", cube.board.square_size},
          {"square_offset_mm", cube.board.square_offset},
          {"cube_size_mm", cube.board.cube_size},
          {"cube_yaw_deg", cube.board.cube_yaw_deg}}},
        {"edge_ids", cube.edge_ids},
        {"camera_distance_mm", cube.camera_distance_mm},
        {"camera_elevation_deg", cube.camera_elevation_deg},
        {"camera_azimuth_deg", cube.camera_azimuth_deg},
        {"detection_sigma_px", cube.detection_sigma_px},
        {"planes_per_edge", cube.planes_per_edge},
        {"sweep_tilt_deg", cube.sweep_tilt_deg},
        {"operator_hint_error_deg", cube.operator_hint_error_deg},
        {"spot_source", cube.spot_source == SpotSource::Annotations ? "annotations" : "segmented"},
        {"runs", c.cube_runs.runs},
        {"calibration_file", c.cube_runs.calibration_file},
        {"calibrate_in_run", c.cube_runs.calibrate_in_run}}}};
}

}  // namespace uscal
