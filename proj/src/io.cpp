#include "uscal/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "uscal/config.hpp"
#include "uscal/error.hpp"

namespace uscal {

namespace fs = std::filesystem;

namespace {

std::string at_line(std::string_view source, int line) {
  return std::string(source) + ":" + std::to_string(line) + ": ";
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// Calls f(line_number, line) for every line, comments stripped when asked.
template <class F>
void for_each_line(std::string_view text, bool strip_comments, F&& f) {
  int n = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto pos = text.find('\n', start);
    std::string_view line = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    ++n;
    if (strip_comments) {
      const auto hash = line.find('#');
      if (hash != std::string_view::npos) line = line.substr(0, hash);
    }
    f(n, trim(line));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
}

double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(ErrorKind::ParseError, where + "bad number '" + std::string(s) + "'");
  }
  return v;
}

long long parse_int(std::string_view s, const std::string& where) {
  long long v = 0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::ParseError, where + "bad integer '" + std::string(s) + "'");
  }
  return v;
}

std::string read_binary(const fs::path& path) { return read_text(path); }

struct PnmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t data_offset = 0;
};

PnmHeader parse_pnm_header(const std::string& data, std::string_view magic, const fs::path& path) {
  const std::string where = path.string() + ": ";
  if (data.size() < 2 || std::string_view(data.data(), 2) != magic) {
    throw Error(ErrorKind::ParseError, where + "expected " + std::string(magic) + " header");
  }
  std::size_t i = 2;
  int values[3] = {0, 0, 0};
  for (int& value : values) {
    while (i < data.size()) {
      if (data[i] == '#') {
        while (i < data.size() && data[i] != '\n') ++i;
      } else if (std::isspace(static_cast<unsigned char>(data[i]))) {
        ++i;
      } else {
        break;
      }
    }
    const std::size_t b = i;
    while (i < data.size() && std::isdigit(static_cast<unsigned char>(data[i]))) ++i;
    if (i == b) throw Error(ErrorKind::ParseError, where + "truncated header");
    value = static_cast<int>(parse_int(std::string_view(data).substr(b, i - b), where));
  }
  if (i >= data.size() || !std::isspace(static_cast<unsigned char>(data[i]))) {
    throw Error(ErrorKind::ParseError, where + "truncated header");
  }
  PnmHeader h{values[0], values[1], values[2], i + 1};
  if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535) {
    throw Error(ErrorKind::ParseError, where + "bad image dimensions or maxval");
  }
  return h;
}

std::string pnm_header(std::string_view magic, int w, int h, int maxval) {
  return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n" +
         std::to_string(maxval) + "\n";
}

void check_payload(const std::string& data, const PnmHeader& h, std::size_t bytes, const fs::path& path) {
  if (data.size() - h.data_offset < bytes) {
    throw Error(ErrorKind::ParseError, path.string() + ": truncated pixel data");
  }
}

Json array3(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from(const Json& j, std::string_view what) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorKind::ParseError, std::string(what) + ": expected an array of 3 numbers");
  }
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw Error(ErrorKind::ParseError, std::string(what) + ": expected numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

Json mat3_row_major(const Mat3& m) {
  Json a = Json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  }
  return a;
}

Mat3 mat3_from(const Json& j, std::string_view what) {
  if (!j.is_array() || j.size() != 9) {
    throw Error(ErrorKind::ParseError, std::string(what) + ": expected 9 numbers, row-major");
  }
  Mat3 m;
  for (int i = 0; i < 9; ++i) {
    if (!j[i].is_number()) throw Error(ErrorKind::ParseError, std::string(what) + ": expected numbers");
    m(i / 3, i % 3) = j[i].get<double>();
  }
  return m;
}

// Exact rotations pass through untouched; rounded ones are projected back.
Mat3 rotation_from(const Json& j, std::string_view what) {
  const Mat3 m = mat3_from(j, what);
  const RigidTransform t(m, Vec3::Zero());
  if (t.is_valid(1e-9)) return m;
  if (!t.is_valid(1e-6)) throw Error(ErrorKind::ParseError, std::string(what) + ": rotation is not orthonormal");
  return nearest_rotation(m);
}

const Json& member(const Json& j, std::string_view key, std::string_view what) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw Error(ErrorKind::ParseError, std::string(what) + ": missing '" + std::string(key) + "'");
  }
  return *it;
}

double number_member(const Json& j, std::string_view key, std::string_view what) {
  const Json& v = member(j, key, what);
  if (!v.is_number()) {
    throw Error(ErrorKind::ParseError, std::string(what) + ": '" + std::string(key) + "' must be a number");
  }
  return v.get<double>();
}

fs::path frame_path(const fs::path& dir, const char* prefix, int k) {
  char name[64];
  std::snprintf(name, sizeof name, "%s_%03d.pgm", prefix, k);
  return dir / name;
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error(ErrorKind::InvalidArgument, "number formatting failed");
  return {buf, ptr};
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::IoError, "read failed: " + path.string());
  return data;
}

void write_text(const fs::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

Json parse_json(std::string_view text, std::string_view source) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::ParseError, std::string(source) + ": " + e.what());
  }
}

Json read_json(const fs::path& path) { return parse_json(read_text(path), path.string()); }

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

void check_schema(const Json& j, std::string_view expected) {
  if (!j.is_object()) throw Error(ErrorKind::ParseError, "expected a JSON object");
  const auto it = j.find("schema");
  if (it == j.end() || !it->is_string()) {
    throw Error(ErrorKind::VersionMismatch, "missing schema tag, expected " + std::string(expected));
  }
  if (it->get<std::string>() != expected) {
    throw Error(ErrorKind::VersionMismatch,
                "schema " + it->get<std::string>() + " where " + std::string(expected) + " is expected");
  }
}

// --- meshes and clouds ------------------------------------------------------

TriangleMesh parse_obj(std::string_view text) {
  TriangleMesh mesh;
  for_each_line(text, true, [&](int n, std::string_view line) {
    if (line.empty()) return;
    const auto tok = tokens(line);
    const std::string where = at_line("obj", n);
    const std::string_view tag = tok[0];
    if (tag == "v") {
      if (tok.size() < 4 || tok.size() > 5) throw Error(ErrorKind::ParseError, where + "vertex needs x y z");
      mesh.vertices.emplace_back(parse_double(tok[1], where), parse_double(tok[2], where),
                                 parse_double(tok[3], where));
    } else if (tag == "f") {
      if (tok.size() != 4) {
        throw Error(ErrorKind::ParseError,
                    where + "face with " + std::to_string(tok.size() - 1) + " vertices (triangles only)");
      }
      std::array<int, 3> tri{};
      for (int i = 0; i < 3; ++i) {
        const std::string_view ref = tok[i + 1].substr(0, tok[i + 1].find('/'));
        const long long idx = parse_int(ref, where);
        const long long nv = static_cast<long long>(mesh.vertices.size());
        const long long zero_based = idx < 0 ? nv + idx : idx - 1;
        if (idx == 0 || zero_based < 0 || zero_based >= nv) {
          throw Error(ErrorKind::ParseError, where + "vertex index out of range");
        }
        tri[i] = static_cast<int>(zero_based);
      }
      mesh.triangles.push_back(tri);
    } else if (tag == "vn" || tag == "vt" || tag == "vp" || tag == "o" || tag == "g" || tag == "s" ||
               tag == "usemtl" || tag == "mtllib") {
      // not used
    } else {
      throw Error(ErrorKind::ParseError, where + "unsupported directive '" + std::string(tag) + "'");
    }
  });
  return mesh;
}

std::string format_obj(const TriangleMesh& mesh) {
  std::string out;
  for (const Vec3& v : mesh.vertices) {
    out += "v " + format_number(v.x()) + " " + format_number(v.y()) + " " + format_number(v.z()) + "\n";
  }
  for (const auto& t : mesh.triangles) {
    out += "f " + std::to_string(t[0] + 1) + " " + std::to_string(t[1] + 1) + " " + std::to_string(t[2] + 1) + "\n";
  }
  return out;
}

TriangleMesh read_obj(const fs::path& path) {
  try {
    return parse_obj(read_text(path));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ParseError) throw;
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

void write_obj(const fs::path& path, const TriangleMesh& mesh) { write_text(path, format_obj(mesh)); }

PointCloud parse_xyz(std::string_view text) {
  PointCloud cloud;
  for_each_line(text, true, [&](int n, std::string_view line) {
    if (line.empty()) return;
    const auto tok = tokens(line);
    const std::string where = at_line("xyz", n);
    if (tok.size() != 3) throw Error(ErrorKind::ParseError, where + "expected x y z");
    cloud.points.emplace_back(parse_double(tok[0], where), parse_double(tok[1], where),
                              parse_double(tok[2], where));
  });
  return cloud;
}

std::string format_xyz(const PointCloud& cloud) {
  std::string out;
  out.reserve(cloud.size() * 48);
  for (const Vec3& p : cloud.points) {
    out += format_number(p.x());
    out += ' ';
    out += format_number(p.y());
    out += ' ';
    out += format_number(p.z());
    out += '\n';
  }
  return out;
}

PointCloud read_xyz(const fs::path& path) { return parse_xyz(read_text(path)); }

void write_xyz(const fs::path& path, const PointCloud& cloud) { write_text(path, format_xyz(cloud)); }

// --- images -----------------------------------------------------------------

void write_pgm(const fs::path& path, const USFrame& frame) {
  if (frame.pixels.size() != static_cast<std::size_t>(frame.width) * frame.height) {
    throw Error(ErrorKind::InvalidArgument, "frame size does not match its pixels");
  }
  std::string data = pnm_header("P5", frame.width, frame.height, 255);
  data.append(frame.pixels.begin(), frame.pixels.end());
  write_text(path, data);
}

USFrame read_pgm(const fs::path& path) {
  const std::string data = read_binary(path);
  const PnmHeader h = parse_pnm_header(data, "P5", path);
  if (h.maxval > 255) throw Error(ErrorKind::ParseError, path.string() + ": expected an 8-bit PGM");
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  check_payload(data, h, n, path);
  USFrame f;
  f.width = h.width;
  f.height = h.height;
  f.pixels.assign(data.begin() + static_cast<std::ptrdiff_t>(h.data_offset),
                  data.begin() + static_cast<std::ptrdiff_t>(h.data_offset + n));
  return f;
}

void write_depth_pgm(const fs::path& path, const DepthMap& depth) {
  std::string data = pnm_header("P5", depth.width(), depth.height(), 65535);
  data.reserve(data.size() + depth.depths.size() * 2);
  for (double z : depth.depths) {
    const double units = std::round(z / kDepthUnitMm);
    if (!(units >= 0.0) || units > 65535.0) {
      throw Error(ErrorKind::InvalidArgument, "depth " + format_number(z) + " mm does not fit 16 bits");
    }
    const auto u = static_cast<std::uint16_t>(units);
    data.push_back(static_cast<char>(u >> 8));
    data.push_back(static_cast<char>(u & 0xff));
  }
  write_text(path, data);
}

DepthMap read_depth_pgm(const fs::path& path, const CameraIntrinsics& k) {
  const std::string data = read_binary(path);
  const PnmHeader h = parse_pnm_header(data, "P5", path);
  if (h.maxval <= 255) throw Error(ErrorKind::ParseError, path.string() + ": expected a 16-bit PGM");
  if (h.width != k.width || h.height != k.height) {
    throw Error(ErrorKind::ParseError, path.string() + ": size does not match the camera");
  }
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  check_payload(data, h, 2 * n, path);
  DepthMap depth(k);
  const auto* p = reinterpret_cast<const unsigned char*>(data.data() + h.data_offset);
  for (std::size_t i = 0; i < n; ++i) {
    depth.depths[i] = static_cast<double>((p[2 * i] << 8) | p[2 * i + 1]) * kDepthUnitMm;
  }
  return depth;
}

void write_ppm(const fs::path& path, const RgbFrame& frame) {
  if (frame.pixels.size() != static_cast<std::size_t>(frame.width) * frame.height * 3) {
    throw Error(ErrorKind::InvalidArgument, "frame size does not match its pixels");
  }
  std::string data = pnm_header("P6", frame.width, frame.height, 255);
  data.append(frame.pixels.begin(), frame.pixels.end());
  write_text(path, data);
}

RgbFrame read_ppm(const fs::path& path) {
  const std::string data = read_binary(path);
  const PnmHeader h = parse_pnm_header(data, "P6", path);
  if (h.maxval > 255) throw Error(ErrorKind::ParseError, path.string() + ": expected an 8-bit PPM");
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height * 3;
  check_payload(data, h, n, path);
  RgbFrame f(h.width, h.height);
  std::copy(data.begin() + static_cast<std::ptrdiff_t>(h.data_offset),
            data.begin() + static_cast<std::ptrdiff_t>(h.data_offset + n), f.pixels.begin());
  return f;
}

// --- CSV ----------------------------------------------------------------------

std::string format_pose_csv(const std::vector<TrackedPose>& poses, double frame_interval_s) {
  std::string out(kPoseCsvHeader);
  out += '\n';
  for (const TrackedPose& p : poses) {
    Eigen::Quaterniond q = p.t_cam_from_marker.quaternion();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    const Vec3& t = p.t_cam_from_marker.translation;
    out += std::to_string(p.frame) + "," + format_number(p.frame * frame_interval_s) + "," +
           format_number(t.x()) + "," + format_number(t.y()) + "," + format_number(t.z()) + "," +
           format_number(q.w()) + "," + format_number(q.x()) + "," + format_number(q.y()) + "," +
           format_number(q.z()) + "," + format_number(p.rms_mm) + "," + (p.lost ? "1" : "0") + "\n";
  }
  return out;
}

std::vector<TrackedPose> parse_pose_csv(std::string_view text) {
  std::vector<TrackedPose> poses;
  bool header = false;
  for_each_line(text, false, [&](int n, std::string_view line) {
    if (line.empty()) return;
    const std::string where = at_line("poses", n);
    if (!header) {
      if (line != kPoseCsvHeader) throw Error(ErrorKind::ParseError, where + "unexpected header");
      header = true;
      return;
    }
    const auto f = split(line, ',');
    if (f.size() != 11) throw Error(ErrorKind::ParseError, where + "expected 11 fields");
    TrackedPose p;
    p.frame = static_cast<int>(parse_int(f[0], where));
    const Vec3 t(parse_double(f[2], where), parse_double(f[3], where), parse_double(f[4], where));
    const Eigen::Quaterniond q(parse_double(f[5], where), parse_double(f[6], where), parse_double(f[7], where),
                               parse_double(f[8], where));
    if (std::abs(q.norm() - 1.0) > 1e-6) {
      throw Error(ErrorKind::ParseError, where + "quaternion norm " + format_number(q.norm()) + " is not 1");
    }
    p.t_cam_from_marker = RigidTransform::from_quaternion(q, t);
    p.rms_mm = parse_double(f[9], where);
    if (f[10] != "0" && f[10] != "1") throw Error(ErrorKind::ParseError, where + "lost must be 0 or 1");
    p.lost = f[10] == "1";
    poses.push_back(p);
  });
  if (!header) throw Error(ErrorKind::ParseError, "poses: missing header");
  return poses;
}

std::string format_annotations_csv(const std::vector<AnnotationRow>& rows) {
  std::string out(kAnnotationCsvHeader);
  out += '\n';
  for (const AnnotationRow& r : rows) {
    out += std::to_string(r.frame) + "," + format_number(r.spot.pixel.x()) + "," +
           format_number(r.spot.pixel.y()) + "," + std::to_string(r.spot.id) + "\n";
  }
  return out;
}

std::vector<AnnotationRow> parse_annotations_csv(std::string_view text) {
  std::vector<AnnotationRow> rows;
  bool header = false;
  for_each_line(text, false, [&](int n, std::string_view line) {
    if (line.empty()) return;
    const std::string where = at_line("annotations", n);
    if (!header) {
      if (line != kAnnotationCsvHeader) throw Error(ErrorKind::ParseError, where + "unexpected header");
      header = true;
      return;
    }
    const auto f = split(line, ',');
    if (f.size() != 4) throw Error(ErrorKind::ParseError, where + "expected 4 fields");
    AnnotationRow r;
    r.frame = static_cast<int>(parse_int(f[0], where));
    r.spot.pixel = Vec2(parse_double(f[1], where), parse_double(f[2], where));
    r.spot.id = static_cast<int>(parse_int(f[3], where));
    rows.push_back(r);
  });
  if (!header) throw Error(ErrorKind::ParseError, "annotations: missing header");
  return rows;
}

// --- JSON payloads ----------------------------------------------------------

Json to_json(const RigidTransform& t) {
  return Json{{"rotation_row_major", mat3_row_major(t.rotation)}, {"translation_mm", array3(t.translation)}};
}

RigidTransform rigid_from_json(const Json& j) {
  return {rotation_from(member(j, "rotation_row_major", "transform"), "transform rotation"),
          vec3_from(member(j, "translation_mm", "transform"), "translation_mm")};
}

Json to_json(const CalibrationReport& r) {
  const CalibrationMatrix& m = r.matrix;
  return Json{{"schema", schema::kCalibration},
              {"matrix_row_major", mat3_row_major(m.a)},
              {"sx", m.sx},
              {"sy", m.sy},
              {"rotation_row_major", mat3_row_major(m.rotation)},
              {"translation_mm", array3(m.translation)},
              {"rms_fit", r.rms_fit},
              {"error_mean", r.error_mean},
              {"error_sd", r.error_sd},
              {"n_frames", r.n_frames},
              {"n_correspondences", r.n_correspondences}};
}

CalibrationReport calibration_report_from_json(const Json& j) {
  check_schema(j, schema::kCalibration);
  const std::string_view what = "calibration";
  CalibrationReport r;
  const Mat3 a = mat3_from(member(j, "matrix_row_major", what), "matrix_row_major");
  r.matrix = CalibrationMatrix::from_affine(a);
  if ((r.matrix.a - a).norm() > 1e-6 * (1.0 + a.norm())) {
    throw Error(ErrorKind::ParseError, "calibration: matrix_row_major is not a shear-free calibration");
  }
  r.matrix.a = a;
  r.matrix.sx = number_member(j, "sx", what);
  r.matrix.sy = number_member(j, "sy", what);
  if (j.contains("rotation_row_major")) {
    r.matrix.rotation = mat3_from(j["rotation_row_major"], "rotation_row_major");
  }
  if (j.contains("translation_mm")) r.matrix.translation = vec3_from(j["translation_mm"], "translation_mm");
  r.rms_fit = j.contains("rms_fit") ? number_member(j, "rms_fit", what) : 0.0;
  r.error_mean = j.contains("error_mean") ? number_member(j, "error_mean", what) : 0.0;
  r.error_sd = j.contains("error_sd") ? number_member(j, "error_sd", what) : 0.0;
  r.n_frames = j.contains("n_frames") ? static_cast<int>(number_member(j, "n_frames", what)) : 0;
  r.n_correspondences =
      j.contains("n_correspondences") ? static_cast<int>(number_member(j, "n_correspondences", what)) : 0;
  r.matrix.validate(1e-6);
  return r;
}

Json to_json(const CubeEvalReport& r) {
  return Json{{"icp_residue_mm", r.icp_residue},
              {"center_offset_mm", r.center_offset},
              {"euler_offsets_deg", {r.euler_offsets[0], r.euler_offsets[1], r.euler_offsets[2]}},
              {"n_points", r.n_points},
              {"gimbal_lock", r.gimbal_lock}};
}

// --- recorded sessions ------------------------------------------------------

fs::path session_depth_path(const fs::path& dir, int k) { return frame_path(dir, "depth", k); }
fs::path session_us_path(const fs::path& dir, int k) { return frame_path(dir, "us", k); }

void write_session(const fs::path& dir, const SessionSetup& setup, const FrameProvider& frames,
                   const SessionTruth* truth) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());

  Json heldout = Json::array();
  for (bool h : setup.heldout) heldout.push_back(h);
  Json j{{"schema", schema::kSession},
         {"phantom", to_json(setup.phantom)},
         {"marker", to_json(setup.marker)},
         {"camera", to_json(setup.camera)},
         {"image", to_json(setup.image)},
         {"phantom_roi_center_mm", array3(setup.phantom_roi_center)},
         {"phantom_roi_radius_mm", setup.phantom_roi_radius},
         {"phantom_rotation_hint_row_major", mat3_row_major(setup.phantom_rotation_hint)},
         {"marker_roi_center_mm", array3(setup.marker_roi_center)},
         {"marker_roi_radius_mm", setup.marker_roi_radius},
         {"marker_rotation_hint_row_major", mat3_row_major(setup.marker_rotation_hint)},
         {"n_frames", setup.n_frames},
         {"heldout", heldout}};
  if (truth != nullptr) {
    CalibrationReport cal;
    cal.matrix = truth->calibration;
    Json cal_json = to_json(cal);
    j["truth"] = Json{{"t_cam_from_phantom", to_json(truth->t_cam_from_phantom)}, {"calibration", cal_json}};
    std::vector<TrackedPose> poses;
    for (std::size_t k = 0; k < truth->t_cam_from_marker.size(); ++k) {
      poses.push_back({static_cast<int>(k), truth->t_cam_from_marker[k], 0.0, false});
    }
    write_text(dir / "truth_poses.csv", format_pose_csv(poses));
  }
  write_json(dir / "session.json", j);
  write_obj(dir / "phantom.obj", make_phantom_mesh(setup.phantom));
  write_obj(dir / "marker.obj", make_marker_mesh(setup.marker));

  std::vector<AnnotationRow> rows;
  for (int k = 0; k < setup.n_frames; ++k) {
    const SessionFrame f = frames(k);
    write_depth_pgm(session_depth_path(dir, k), f.depth);
    write_pgm(session_us_path(dir, k), f.us);
    for (const UsSpot& s : f.us.annotations) rows.push_back({k, s});
  }
  write_text(dir / "annotations.csv", format_annotations_csv(rows));
}

SessionSetup read_session_setup(const fs::path& dir) {
  const Json j = read_json(dir / "session.json");
  check_schema(j, schema::kSession);
  const std::string_view what = "session";
  SessionSetup s;
  s.phantom = nwire_params_from_json(member(j, "phantom", what));
  s.marker = marker_params_from_json(member(j, "marker", what));
  s.camera = camera_from_json(member(j, "camera", what));
  s.image = image_geometry_from_json(member(j, "image", what));
  s.phantom_roi_center = vec3_from(member(j, "phantom_roi_center_mm", what), "phantom_roi_center_mm");
  s.phantom_roi_radius = number_member(j, "phantom_roi_radius_mm", what);
  s.phantom_rotation_hint =
      rotation_from(member(j, "phantom_rotation_hint_row_major", what), "phantom_rotation_hint");
  s.marker_roi_center = vec3_from(member(j, "marker_roi_center_mm", what), "marker_roi_center_mm");
  s.marker_roi_radius = number_member(j, "marker_roi_radius_mm", what);
  s.marker_rotation_hint =
      rotation_from(member(j, "marker_rotation_hint_row_major", what), "marker_rotation_hint");
  s.n_frames = static_cast<int>(number_member(j, "n_frames", what));
  const Json& heldout = member(j, "heldout", what);
  if (!heldout.is_array() || static_cast<int>(heldout.size()) != s.n_frames) {
    throw Error(ErrorKind::ParseError, "session: heldout must list one flag per frame");
  }
  for (const Json& h : heldout) {
    if (!h.is_boolean()) throw Error(ErrorKind::ParseError, "session: heldout flags must be booleans");
    s.heldout.push_back(h.get<bool>());
  }
  if (s.n_frames <= 0) throw Error(ErrorKind::ParseError, "session: no frames");
  return s;
}

FrameProvider session_frames(const fs::path& dir, const SessionSetup& setup) {
  std::vector<std::vector<UsSpot>> annotations(static_cast<std::size_t>(setup.n_frames));
  if (fs::exists(dir / "annotations.csv")) {
    for (const AnnotationRow& r : parse_annotations_csv(read_text(dir / "annotations.csv"))) {
      if (r.frame >= 0 && r.frame < setup.n_frames) annotations[static_cast<std::size_t>(r.frame)].push_back(r.spot);
    }
  }
  return [dir, setup, annotations](int k) {
    if (k < 0 || k >= setup.n_frames) {
      throw Error(ErrorKind::InvalidArgument, "frame " + std::to_string(k) + " is not in the session");
    }
    SessionFrame f;
    f.index = k;
    f.depth = read_depth_pgm(session_depth_path(dir, k), setup.camera);
    f.us = read_pgm(session_us_path(dir, k));
    f.us.sx = setup.image.sx;
    f.us.sy = setup.image.sy;
    f.us.frame_index = k;
    f.us.annotations = annotations[static_cast<std::size_t>(k)];
    return f;
  };
}

}  // namespace uscal
