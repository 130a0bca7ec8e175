#include "livetex/matcher.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "livetex/error.hpp"
#include "livetex/png_io.hpp"

namespace livetex::matcher {

Hsv rgb_to_hsv(Rgb c) {
  const float mx = std::max({c.r, c.g, c.b});
  const float mn = std::min({c.r, c.g, c.b});
  const float delta = mx - mn;
  Hsv out;
  out.v = mx;
  out.s = mx > 0.f ? delta / mx : 0.f;
  if (delta <= 0.f) return out;
  float h;
  if (mx == c.r)
    h = 60.f * std::fmod((c.g - c.b) / delta, 6.f);
  else if (mx == c.g)
    h = 60.f * ((c.b - c.r) / delta + 2.f);
  else
    h = 60.f * ((c.r - c.g) / delta + 4.f);
  if (h < 0.f) h += 360.f;
  if (h >= 360.f) h -= 360.f;
  out.h = h;
  return out;
}

std::optional<float> descriptor_hue(Rgb c, const HueConfig& cfg) {
  const Hsv hsv = rgb_to_hsv(c);
  if (hsv.v < cfg.v_black) return kBlackHue;
  if (hsv.s < cfg.s_white && hsv.v > cfg.v_white) return kWhiteHue;
  if (hsv.s >= cfg.s_min) return hsv.h;
  return std::nullopt;
}

HueImage hue_descriptor(const RgbImage& image, const HueConfig& cfg) {
  HueImage out{Grid<float>(image.width(), image.height(), 0.f), Mask(image.width(), image.height(), 0)};
  auto src = image.pixels();
  auto hue = out.hue.pixels();
  auto def = out.defined.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (auto h = descriptor_hue(src[i], cfg)) {
      hue[i] = *h;
      def[i] = 1;
    }
  }
  return out;
}

HueTemplate make_template(const Mesh& mesh, const PinholeCamera& camera, const RigidPose& pose) {
  const RgbImage dummy(16, 16, Rgb{1.f, 1.f, 1.f});
  const raster::ColorRender render = raster::render_color(mesh, dummy, camera, pose);
  int x0 = camera.width, y0 = camera.height, x1 = -1, y1 = -1;
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      if (!render.coverage(x, y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) throw Error(ErrorCode::not_visible, "object does not project into the template view");

  HueTemplate tpl;
  tpl.bbox = {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
  tpl.uv_map = Grid<raster::Uv>(tpl.bbox.width, tpl.bbox.height, raster::Uv{0.f, 0.f});
  tpl.mask = Mask(tpl.bbox.width, tpl.bbox.height, 0);
  for (int y = 0; y < tpl.bbox.height; ++y) {
    for (int x = 0; x < tpl.bbox.width; ++x) {
      if (!render.coverage(x0 + x, y0 + y)) continue;
      tpl.mask(x, y) = 1;
      tpl.uv_map(x, y) = render.uv(x0 + x, y0 + y);
    }
  }
  tpl.pose = pose;
  tpl.camera = camera;
  const Eigen::Vector3d origin = pose.translation;  // object origin in camera space
  if (origin.z() > 1e-9) tpl.origin = camera.project(origin) - Eigen::Vector2d(x0, y0);
  return tpl;
}

void expected_hue(const HueTemplate& tpl, const InstanceHypothesis& hypothesis, const HueConfig& cfg,
                  HueImage& out) {
  const int w = tpl.bbox.width, h = tpl.bbox.height;
  if (out.width() != w || out.height() != h) {
    out.hue = Grid<float>(w, h, 0.f);
    out.defined = Mask(w, h, 0);
  }
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* m = tpl.mask.row(y);
    const raster::Uv* uv = tpl.uv_map.row(y);
    float* hue = out.hue.row(y);
    std::uint8_t* def = out.defined.row(y);
    for (int x = 0; x < w; ++x) {
      def[x] = 0;
      if (!m[x]) continue;
      if (auto hv = descriptor_hue(sample_uv(hypothesis.texture, uv[x][0], uv[x][1]), cfg)) {
        hue[x] = *hv;
        def[x] = 1;
      }
    }
  }
}

HueImage expected_hue(const HueTemplate& tpl, const InstanceHypothesis& hypothesis, const HueConfig& cfg) {
  HueImage out;
  expected_hue(tpl, hypothesis, cfg, out);
  return out;
}

HueImage crop(const HueImage& frame, const PixelRect& rect) {
  HueImage out{Grid<float>(rect.width, rect.height, 0.f), Mask(rect.width, rect.height, 0)};
  for (int y = 0; y < rect.height; ++y) {
    const int fy = rect.y + y;
    if (fy < 0 || fy >= frame.height()) continue;
    for (int x = 0; x < rect.width; ++x) {
      const int fx = rect.x + x;
      if (fx < 0 || fx >= frame.width()) continue;
      out.hue(x, y) = frame.hue(fx, fy);
      out.defined(x, y) = frame.defined(fx, fy);
    }
  }
  return out;
}

InlierResult color_inlier_fraction(const HueImage& observed, const HueImage& expected, const Mask& mask,
                                   float max_hue_distance) {
  if (observed.width() != expected.width() || observed.height() != expected.height() ||
      mask.width() != expected.width() || mask.height() != expected.height())
    throw Error(ErrorCode::invalid_argument, "observed, expected and mask sizes differ");
  InlierResult r;
  for (int y = 0; y < expected.height(); ++y) {
    const std::uint8_t* m = mask.row(y);
    const std::uint8_t* od = observed.defined.row(y);
    const std::uint8_t* ed = expected.defined.row(y);
    const float* oh = observed.hue.row(y);
    const float* eh = expected.hue.row(y);
    for (int x = 0; x < expected.width(); ++x) {
      if (!m[x] || !od[x] || !ed[x]) continue;
      ++r.counted;
      r.inliers += hue_distance(oh[x], eh[x]) <= max_hue_distance;
    }
  }
  r.degenerate = r.counted == 0;
  r.fraction = r.degenerate ? 0.0 : static_cast<double>(r.inliers) / static_cast<double>(r.counted);
  return r;
}

std::vector<Assignment> classify_instances(const HueImage& frame_hue, std::span<const Candidate> candidates,
                                           const TemplateStore& templates,
                                           std::span<const InstanceHypothesis> hypotheses,
                                           const ClassifyConfig& cfg, ClassifyStats* stats) {
  std::vector<Assignment> out;
  std::vector<bool> taken(hypotheses.size(), false);
  std::size_t remaining = hypotheses.size();
  std::map<std::pair<int, std::size_t>, HueImage> expected_cache;

  const std::size_t limit = std::min(candidates.size(), cfg.max_candidates);
  for (std::size_t ci = 0; ci < limit && remaining > 0; ++ci) {
    const Candidate& cand = candidates[ci];
    if (stats) ++stats->candidates_used;
    if (cand.template_id < 0 || static_cast<std::size_t>(cand.template_id) >= templates.size()) continue;
    const HueTemplate& tpl = templates.at(cand.template_id);
    const HueImage observed = crop(frame_hue, {cand.x, cand.y, tpl.bbox.width, tpl.bbox.height});

    std::optional<std::size_t> best;
    double best_fraction = -1.0;
    for (std::size_t hi = 0; hi < hypotheses.size(); ++hi) {
      if (taken[hi]) continue;
      auto key = std::make_pair(cand.template_id, hi);
      auto it = expected_cache.find(key);
      if (it == expected_cache.end()) {
        const auto t0 = std::chrono::steady_clock::now();
        it = expected_cache.emplace(key, expected_hue(tpl, hypotheses[hi], cfg.hue)).first;
        if (stats)
          stats->lookup_ms.push_back(
              std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
      }
      const InlierResult r = color_inlier_fraction(observed, it->second, tpl.mask, cfg.max_hue_distance);
      if (r.degenerate || r.fraction < cfg.inlier_threshold) continue;
      // Strict '>' keeps the earliest hypothesis on ties.
      if (r.fraction > best_fraction) {
        best_fraction = r.fraction;
        best = hi;
      }
    }
    if (best) {
      taken[*best] = true;
      --remaining;
      out.push_back({ci, cand, hypotheses[*best].texture_id, best_fraction});
    }
  }
  return out;
}

Icosahedron subdivided_icosahedron(int levels) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> v = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                                    {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                                    {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<std::array<int, 3>> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                           {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                           {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                           {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int level = 0; level < levels; ++level) {
    std::map<std::pair<int, int>, int> midpoints;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto [it, inserted] = midpoints.try_emplace({key.first, key.second}, static_cast<int>(v.size()));
      if (inserted) v.push_back((v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)]).normalized());
      return it->second;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& [a, b, c] : faces) {
      const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
      next.push_back({a, ab, ca});
      next.push_back({b, bc, ab});
      next.push_back({c, ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  return {std::move(v), std::move(faces)};
}

RigidPose view_pose(const Eigen::Vector3d& direction, double distance, double roll_deg) {
  const Eigen::Vector3d dir = direction.normalized();
  const Eigen::Vector3d up = std::abs(dir.z()) > 0.999 ? Eigen::Vector3d::UnitY() : Eigen::Vector3d::UnitZ();
  const RigidPose look = RigidPose::look_at(dir * distance, Eigen::Vector3d::Zero(), up);
  const Eigen::Matrix3d roll = Eigen::AngleAxisd(roll_deg * M_PI / 180.0, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  return RigidPose{roll, Eigen::Vector3d::Zero()} * look;
}

std::vector<TemplatePose> sample_template_poses(bool upper_hemisphere) {
  std::vector<Eigen::Vector3d> views;
  for (const auto& d : icosphere_directions(2))
    if (!upper_hemisphere || d.z() >= -1e-9) views.push_back(d);

  std::vector<TemplatePose> out;
  out.reserve(views.size() * std::size(kRollDegrees) * std::size(kTemplateDistances));
  for (std::size_t vi = 0; vi < views.size(); ++vi) {
    for (std::size_t ri = 0; ri < std::size(kRollDegrees); ++ri) {
      for (std::size_t di = 0; di < std::size(kTemplateDistances); ++di) {
        TemplatePose tp;
        tp.pose = view_pose(views[vi], kTemplateDistances[di], kRollDegrees[ri]);
        tp.distance = kTemplateDistances[di];
        tp.view = static_cast<int>(vi);
        tp.roll_index = static_cast<int>(ri);
        tp.distance_bin = static_cast<int>(di);
        out.push_back(tp);
      }
    }
  }
  return out;
}

namespace {

std::string indexed_name(const char* prefix, std::size_t id) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%06zu.png", prefix, id);
  return buf;
}

}  // namespace

void TemplateStore::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / "templates.txt");
  if (!index) throw Error(ErrorCode::io, "cannot write template index in " + dir.string());
  index << "# id x y width height origin_x origin_y fx fy cx cy image_width image_height pose[16]\n";
  index << std::setprecision(17);
  for (std::size_t i = 0; i < templates_.size(); ++i) {
    const HueTemplate& t = templates_[i];
    index << i << ' ' << t.bbox.x << ' ' << t.bbox.y << ' ' << t.bbox.width << ' ' << t.bbox.height << ' '
          << t.origin.x() << ' ' << t.origin.y() << ' ' << t.camera.fx << ' ' << t.camera.fy << ' ' << t.camera.cx
          << ' ' << t.camera.cy << ' ' << t.camera.width << ' ' << t.camera.height;
    const Eigen::Matrix4d m = t.pose.matrix();
    for (int k = 0; k < 16; ++k) index << ' ' << m(k / 4, k % 4);
    index << '\n';

    Grid<Uv16> uv(t.bbox.width, t.bbox.height, Uv16{0, 0});
    auto src = t.uv_map.pixels();
    auto dst = uv.pixels();
    for (std::size_t k = 0; k < src.size(); ++k) {
      dst[k] = {static_cast<std::uint16_t>(std::lround(std::clamp(src[k][0], 0.f, 1.f) * 65535.f)),
                static_cast<std::uint16_t>(std::lround(std::clamp(src[k][1], 0.f, 1.f) * 65535.f))};
    }
    write_png_ga16(dir / indexed_name("uv", i), uv);
    Grid<std::uint8_t> mask = t.mask;
    for (auto& m8 : mask.pixels()) m8 = m8 ? 255 : 0;
    write_png_gray8(dir / indexed_name("mask", i), mask);
  }
}

TemplateStore TemplateStore::load(const std::filesystem::path& dir) {
  std::ifstream index(dir / "templates.txt");
  if (!index) throw Error(ErrorCode::io, "cannot open template index in " + dir.string());
  TemplateStore store;
  std::string line;
  int line_no = 0;
  while (std::getline(index, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::size_t id = 0;
    HueTemplate t;
    Eigen::Matrix4d m;
    ls >> id >> t.bbox.x >> t.bbox.y >> t.bbox.width >> t.bbox.height >> t.origin.x() >> t.origin.y() >>
        t.camera.fx >> t.camera.fy >> t.camera.cx >> t.camera.cy >> t.camera.width >> t.camera.height;
    for (int k = 0; k < 16; ++k) ls >> m(k / 4, k % 4);
    if (!ls || id != store.size()) {
      std::ostringstream msg;
      msg << (dir / "templates.txt").string() << ":" << line_no << ": malformed template record";
      throw Error(ErrorCode::parse, msg.str());
    }
    t.pose = RigidPose::from_matrix(m);
    const Grid<Uv16> uv = read_png_ga16(dir / indexed_name("uv", id));
    const Grid<std::uint8_t> mask = read_png_gray8(dir / indexed_name("mask", id));
    if (uv.width() != t.bbox.width || uv.height() != t.bbox.height || mask.width() != t.bbox.width ||
        mask.height() != t.bbox.height)
      throw Error(ErrorCode::parse, "template " + std::to_string(id) + " raster size does not match its bbox");
    t.uv_map = Grid<raster::Uv>(uv.width(), uv.height());
    t.mask = Mask(uv.width(), uv.height(), 0);
    for (std::size_t k = 0; k < uv.size(); ++k) {
      t.uv_map.pixels()[k] = {uv.pixels()[k][0] / 65535.f, uv.pixels()[k][1] / 65535.f};
      t.mask.pixels()[k] = mask.pixels()[k] > 127;
    }
    store.add(std::move(t));
  }
  return store;
}

}  // namespace livetex::matcher
