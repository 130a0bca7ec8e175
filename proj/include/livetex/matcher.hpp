#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "livetex/geometry.hpp"
#include "livetex/grid.hpp"
#include "livetex/raster.hpp"

namespace livetex::matcher {

/// Cut-offs for the achromatic remap. Pixels darker than v_black read as
/// blue (240 deg); bright unsaturated pixels read as yellow (60 deg).
struct HueConfig {
  float v_black = 0.12f;
  float v_white = 0.7f;
  float s_white = 0.1f;
  float s_min = 0.1f;
};

inline constexpr float kBlackHue = 240.f;
inline constexpr float kWhiteHue = 60.f;

struct Hsv {
  float h = 0.f;  // degrees in [0, 360)
  float s = 0.f;
  float v = 0.f;
};

Hsv rgb_to_hsv(Rgb c);

/// Descriptor hue of one color, or nullopt when it carries no reliable hue.
std::optional<float> descriptor_hue(Rgb c, const HueConfig& cfg = {});

struct HueImage {
  Grid<float> hue;
  Mask defined;

  int width() const { return hue.width(); }
  int height() const { return hue.height(); }
};

HueImage hue_descriptor(const RgbImage& image, const HueConfig& cfg = {});

/// Circular distance in degrees, in [0, 180].
inline float hue_distance(float a, float b) {
  float d = std::fmod(std::abs(a - b), 360.f);
  return d > 180.f ? 360.f - d : d;
}

struct PixelRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

/// Expected surface coordinates of one training view, cropped to the object.
struct HueTemplate {
  PixelRect bbox;            // in the training image
  Grid<raster::Uv> uv_map;   // bbox-sized
  Mask mask;                 // bbox-sized object coverage
  RigidPose pose;            // object-to-camera
  PinholeCamera camera;
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();  // object origin projected, relative to bbox
};

/// Throws Error{not_visible} when nothing of the mesh lands in the image.
HueTemplate make_template(const Mesh& mesh, const PinholeCamera& camera, const RigidPose& pose);

struct InstanceHypothesis {
  std::string texture_id;
  RgbImage texture;
};

/// Hue of the hypothesis texture under every masked template pixel.
HueImage expected_hue(const HueTemplate& tpl, const InstanceHypothesis& hypothesis, const HueConfig& cfg = {});
void expected_hue(const HueTemplate& tpl, const InstanceHypothesis& hypothesis, const HueConfig& cfg,
                  HueImage& out);

/// Window of `frame` at (x, y); pixels outside the frame are undefined.
HueImage crop(const HueImage& frame, const PixelRect& rect);

struct InlierResult {
  double fraction = 0.0;
  std::size_t inliers = 0;
  std::size_t counted = 0;
  bool degenerate = false;  // no pixel defined on both sides
};

inline constexpr float kHueInlierDegrees = 54.f;
inline constexpr double kInlierFraction = 0.70;
inline constexpr std::size_t kMaxCandidates = 30;

/// Fraction of masked pixels, defined in both images, whose hues are within
/// `max_hue_distance` degrees.
InlierResult color_inlier_fraction(const HueImage& observed, const HueImage& expected, const Mask& mask,
                                   float max_hue_distance = kHueInlierDegrees);

struct Candidate {
  int template_id = 0;
  int x = 0;  // template bbox top-left in the frame
  int y = 0;
  double score = 0.0;
  std::optional<int> depth_bin;
};

class TemplateStore {
 public:
  int add(HueTemplate tpl) {
    templates_.push_back(std::move(tpl));
    return static_cast<int>(templates_.size()) - 1;
  }
  const HueTemplate& at(int id) const { return templates_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return templates_.size(); }
  bool empty() const { return templates_.empty(); }

  /// Directory with `templates.txt`, `uv_%06d.png` (16-bit gray+alpha
  /// holding u, v) and `mask_%06d.png`.
  void save(const std::filesystem::path& dir) const;
  static TemplateStore load(const std::filesystem::path& dir);

 private:
  std::vector<HueTemplate> templates_;
};

struct ClassifyConfig {
  double inlier_threshold = kInlierFraction;
  float max_hue_distance = kHueInlierDegrees;
  std::size_t max_candidates = kMaxCandidates;
  HueConfig hue;
};

struct Assignment {
  std::size_t candidate_index = 0;
  Candidate candidate;
  std::string texture_id;
  double fraction = 0.0;
};

struct ClassifyStats {
  std::size_t candidates_used = 0;
  std::vector<double> lookup_ms;  // one entry per expected-hue lookup
};

/// Walks candidates in order; each takes the best remaining hypothesis whose
/// inlier fraction reaches the threshold. Hypotheses and candidates are used
/// at most once; stops when every hypothesis is assigned.
std::vector<Assignment> classify_instances(const HueImage& frame_hue, std::span<const Candidate> candidates,
                                           const TemplateStore& templates,
                                           std::span<const InstanceHypothesis> hypotheses,
                                           const ClassifyConfig& cfg = {}, ClassifyStats* stats = nullptr);

struct Icosahedron {
  std::vector<Eigen::Vector3d> vertices;  // unit length
  std::vector<std::array<int, 3>> faces;
};

/// Icosahedron subdivided `levels` times, midpoints pushed onto the unit sphere.
Icosahedron subdivided_icosahedron(int levels);

/// Unit vertices of an icosahedron subdivided `levels` times.
inline std::vector<Eigen::Vector3d> icosphere_directions(int levels) { return subdivided_icosahedron(levels).vertices; }

struct TemplatePose {
  RigidPose pose;  // object-to-camera; object origin on the optical axis
  double distance = 0.0;
  int view = 0;
  int roll_index = 0;
  int distance_bin = 0;
};

inline constexpr double kTemplateDistances[] = {0.65, 0.75, 0.85, 0.95, 1.05, 1.15};
inline constexpr double kRollDegrees[] = {-45.0, -30.0, -15.0, 0.0, 15.0, 30.0, 45.0};

/// Views from a twice-subdivided icosahedron (closed z >= 0 half when
/// `upper_hemisphere`), each with seven rolls and six distances (meters).
std::vector<TemplatePose> sample_template_poses(bool upper_hemisphere = true);

/// Pose of a camera at `distance` along `direction` looking at the origin,
/// rolled by `roll_deg` about its optical axis.
RigidPose view_pose(const Eigen::Vector3d& direction, double distance, double roll_deg);

}  // namespace livetex::matcher
