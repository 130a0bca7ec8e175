#include "livetex/scene_io.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <regex>
#include <sstream>
#include <tuple>

#include "livetex/error.hpp"
#include "livetex/png_io.hpp"

namespace livetex {
namespace {

[[noreturn]] void parse_fail(const std::string& source, int line, const std::string& what) {
  std::ostringstream msg;
  msg << source << ":" << line << ": " << what;
  throw Error(ErrorCode::parse, msg.str());
}

// Resolves a 1-based (or negative, relative) OBJ index; 0 means absent.
int resolve_index(long raw, std::size_t count, const std::string& source, int line) {
  long idx = raw > 0 ? raw - 1 : static_cast<long>(count) + raw;
  if (raw == 0 || idx < 0 || idx >= static_cast<long>(count)) parse_fail(source, line, "index out of range");
  return static_cast<int>(idx);
}

struct Corner {
  int v = -1;
  int vt = -1;
  int vn = -1;
  auto key() const { return std::tie(v, vt, vn); }
  bool operator<(const Corner& o) const { return key() < o.key(); }
};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

Mesh parse_obj(std::istream& in, const std::string& source) {
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector2d> uvs;
  std::vector<Eigen::Vector3d> normals;
  std::vector<std::array<Corner, 3>> faces;
  bool missing_uv = false;
  bool missing_normal = false;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Eigen::Vector3d p;
      if (!(ls >> p.x() >> p.y() >> p.z())) parse_fail(source, line_no, "malformed vertex");
      positions.push_back(p);
    } else if (tag == "vt") {
      Eigen::Vector2d t;
      if (!(ls >> t.x() >> t.y())) parse_fail(source, line_no, "malformed texture coordinate");
      if (t.x() < -1e-6 || t.x() > 1 + 1e-6 || t.y() < -1e-6 || t.y() > 1 + 1e-6)
        parse_fail(source, line_no, "texture coordinate outside [0,1]");
      uvs.emplace_back(std::clamp(t.x(), 0.0, 1.0), std::clamp(1.0 - t.y(), 0.0, 1.0));
    } else if (tag == "vn") {
      Eigen::Vector3d n;
      if (!(ls >> n.x() >> n.y() >> n.z())) parse_fail(source, line_no, "malformed normal");
      if (!(n.norm() > 0)) parse_fail(source, line_no, "zero-length normal");
      normals.push_back(n.normalized());
    } else if (tag == "f") {
      std::vector<Corner> poly;
      std::string tok;
      while (ls >> tok) {
        Corner c;
        std::array<std::string, 3> parts;
        std::size_t field = 0;
        for (char ch : tok) {
          if (ch == '/') {
            if (++field > 2) parse_fail(source, line_no, "malformed face corner '" + tok + "'");
          } else {
            parts[field] += ch;
          }
        }
        try {
          c.v = resolve_index(std::stol(parts[0]), positions.size(), source, line_no);
          if (!parts[1].empty()) c.vt = resolve_index(std::stol(parts[1]), uvs.size(), source, line_no);
          if (!parts[2].empty()) c.vn = resolve_index(std::stol(parts[2]), normals.size(), source, line_no);
        } catch (const std::logic_error&) {
          parse_fail(source, line_no, "malformed face corner '" + tok + "'");
        }
        missing_uv |= c.vt < 0;
        missing_normal |= c.vn < 0;
        poly.push_back(c);
      }
      if (poly.size() < 3) parse_fail(source, line_no, "face with fewer than 3 corners");
      for (std::size_t i = 1; i + 1 < poly.size(); ++i) faces.push_back({poly[0], poly[i], poly[i + 1]});
    }
    // Other records (o, g, s, usemtl, mtllib, l) carry nothing we use.
  }

  if (faces.empty()) throw Error(ErrorCode::degenerate_mesh, source + ": mesh has no faces");
  if (missing_uv) throw Error(ErrorCode::missing_uv, source + ": faces without texture coordinates; a UV atlas is required");

  Mesh mesh;
  std::map<Corner, std::uint32_t> corner_ids;
  for (const auto& face : faces) {
    Triangle tri{};
    for (int k = 0; k < 3; ++k) {
      Corner c = face[static_cast<std::size_t>(k)];
      if (missing_normal) c.vn = -1;
      auto [it, inserted] = corner_ids.try_emplace(c, static_cast<std::uint32_t>(mesh.vertices.size()));
      if (inserted) {
        Vertex v;
        v.position = positions[static_cast<std::size_t>(c.v)];
        v.uv = uvs[static_cast<std::size_t>(c.vt)];
        if (c.vn >= 0) v.normal = normals[static_cast<std::size_t>(c.vn)];
        mesh.vertices.push_back(v);
      }
      tri[static_cast<std::size_t>(k)] = it->second;
    }
    mesh.triangles.push_back(tri);
  }
  if (missing_normal) compute_vertex_normals(mesh);
  finalize_mesh(mesh);
  return mesh;
}

Mesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open mesh " + path.string());
  return parse_obj(in, path.string());
}

void write_mesh(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write mesh " + path.string());
  // Positions are shared between split vertices; uv and normal stay per vertex.
  std::map<std::tuple<double, double, double>, std::size_t> position_ids;
  std::vector<std::size_t> vertex_position(mesh.vertices.size());
  std::ostringstream vs;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& p = mesh.vertices[i].position;
    auto [it, inserted] = position_ids.try_emplace({p.x(), p.y(), p.z()}, position_ids.size());
    if (inserted) vs << "v " << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << '\n';
    vertex_position[i] = it->second;
  }
  out << "# livetex mesh\n" << vs.str();
  for (const auto& v : mesh.vertices) out << "vt " << format_double(v.uv.x()) << ' ' << format_double(1.0 - v.uv.y()) << '\n';
  for (const auto& v : mesh.vertices)
    out << "vn " << format_double(v.normal.x()) << ' ' << format_double(v.normal.y()) << ' ' << format_double(v.normal.z()) << '\n';
  for (const auto& t : mesh.triangles) {
    out << 'f';
    for (auto idx : t) out << ' ' << vertex_position[idx] + 1 << '/' << idx + 1 << '/' << idx + 1;
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

PinholeCamera load_camera(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open camera file " + path.string());
  std::ostringstream all;
  all << in.rdbuf();
  const std::string text = all.str();

  PinholeCamera cam;
  std::istringstream positional(text);
  double w = 0, h = 0;
  if (positional >> cam.fx >> cam.fy >> cam.cx >> cam.cy >> w >> h) {
    cam.width = static_cast<int>(w);
    cam.height = static_cast<int>(h);
  } else {
    std::map<std::string, double> kv;
    std::istringstream lines(text);
    std::string line;
    int line_no = 0;
    while (std::getline(lines, line)) {
      ++line_no;
      std::istringstream ls(line);
      std::string key;
      double value = 0;
      if (!(ls >> key) || key[0] == '#') continue;
      if (!key.empty() && (key.back() == ':' || key.back() == '=')) key.pop_back();
      if (!(ls >> value)) parse_fail(path.string(), line_no, "expected '<key> <value>'");
      kv[key] = value;
    }
    for (const char* key : {"fx", "fy", "cx", "cy", "width", "height"})
      if (!kv.count(key)) throw Error(ErrorCode::parse, path.string() + ": missing key '" + key + "'");
    cam = {kv["fx"], kv["fy"], kv["cx"], kv["cy"], static_cast<int>(kv["width"]), static_cast<int>(kv["height"])};
  }
  cam.validate();
  return cam;
}

void write_camera(const std::filesystem::path& path, const PinholeCamera& camera) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << format_double(camera.fx) << ' ' << format_double(camera.fy) << ' ' << format_double(camera.cx) << ' '
      << format_double(camera.cy) << ' ' << camera.width << ' ' << camera.height << '\n';
}

std::vector<RigidPose> load_poses(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open pose file " + path.string());
  std::vector<RigidPose> poses;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    Eigen::Matrix4d m;
    for (int i = 0; i < 16; ++i)
      if (!(ls >> m(i / 4, i % 4))) parse_fail(path.string(), line_no, "expected 16 numbers");
    double extra = 0;
    if (ls >> extra) parse_fail(path.string(), line_no, "more than 16 numbers");
    try {
      bool corrected = false;
      poses.push_back(RigidPose::from_matrix(m, 1e-3, &corrected));
      if (corrected && warnings) {
        std::ostringstream msg;
        msg << path.string() << ":" << line_no << ": rotation re-orthonormalized";
        warnings->push_back(msg.str());
      }
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << path.string() << ":" << line_no << ": " << e.what();
      throw Error(e.code(), msg.str());
    }
  }
  return poses;
}

void write_poses(const std::filesystem::path& path, const std::vector<RigidPose>& poses) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  for (const auto& pose : poses) {
    const Eigen::Matrix4d m = pose.matrix();
    for (int i = 0; i < 16; ++i) out << (i ? " " : "") << std::setprecision(17) << m(i / 4, i % 4);
    out << '\n';
  }
}

std::filesystem::path frame_path(const std::filesystem::path& dir, int index) {
  char name[32];
  std::snprintf(name, sizeof name, "frame_%06d.png", index);
  return dir / name;
}

SequenceReader::SequenceReader(const std::filesystem::path& dir) : dir_(dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::io, dir.string() + " is not a directory");
  camera_ = load_camera(dir / "camera.txt");
  poses_ = load_poses(dir / "poses.txt", &warnings_);

  static const std::regex frame_name(R"(frame_(\d{6})\.png)");
  std::vector<int> indices;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, frame_name)) indices.push_back(std::stoi(m[1]));
  }
  if (indices.size() != poses_.size()) {
    std::ostringstream msg;
    msg << dir.string() << ": " << poses_.size() << " poses but " << indices.size() << " frames";
    throw Error(ErrorCode::count_mismatch, msg.str());
  }
  std::sort(indices.begin(), indices.end());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] != static_cast<int>(i))
      throw Error(ErrorCode::count_mismatch, dir.string() + ": frame numbering is not contiguous from 0");
  }
}

std::optional<FrameRecord> SequenceReader::next() {
  if (cursor_ >= poses_.size()) return std::nullopt;
  FrameRecord rec;
  rec.index = static_cast<int>(cursor_);
  rec.image = read_png(frame_path(dir_, rec.index));
  rec.pose = poses_[cursor_];
  rec.camera = camera_;
  ++cursor_;
  if (rec.image.width() != camera_.width || rec.image.height() != camera_.height) {
    std::ostringstream msg;
    msg << "frame " << rec.index << " is " << rec.image.width() << "x" << rec.image.height() << ", camera expects "
        << camera_.width << "x" << camera_.height;
    throw Error(ErrorCode::frame_mismatch, msg.str());
  }
  return rec;
}

}  // namespace livetex
