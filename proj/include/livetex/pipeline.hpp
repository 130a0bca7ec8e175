#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "livetex/exposure.hpp"
#include "livetex/fusion.hpp"
#include "livetex/matcher.hpp"
#include "livetex/raster.hpp"
#include "livetex/scene_io.hpp"

namespace livetex {

struct PipelineConfig {
  std::filesystem::path mesh_path;
  std::filesystem::path sequence_path;
  std::filesystem::path output_dir;
  fusion::MergeMode merge_mode = fusion::MergeMode::argmax;
  exposure::Mode exposure_mode = exposure::Mode::first_frame;
  raster::RasterConfig raster;
  int blend_ramp = fusion::kBlendRamp;  // 0 disables blending
  matcher::ClassifyConfig matcher;
  bool dump_debug = false;
  bool dump_merge_maps = false;

  /// texture_size must be a power of two in [64, 4096].
  void validate() const;
};

/// Sets one `key = value` option, using the long flag names of the CLI
/// (`texture-size`, `merge-mode`, ...). Throws Error{invalid_argument}.
void set_config_option(PipelineConfig& cfg, const std::string& key, const std::string& value);

/// Reads `key = value` lines ('#' comments) on top of `base`.
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

std::string to_string(fusion::MergeMode mode);
std::string to_string(exposure::Mode mode);

struct FrameTiming {
  int frame = 0;
  double exposure_ms = 0, focus_ms = 0, depth_ms = 0, mask_ms = 0, texel_ms = 0, extract_ms = 0, blend_ms = 0,
         merge_ms = 0;
  double total_ms = 0;
  std::size_t texels = 0;  // texels contributed by the frame
};

struct SkippedFrame {
  int frame = 0;
  std::string code;
  std::string message;
};

/// Streams frames into one texture. All per-frame buffers persist between
/// frames.
class Reconstructor {
 public:
  Reconstructor(Mesh mesh, PipelineConfig cfg);

  /// Runs every stage on one frame. Raster errors (the object behind the
  /// camera, for instance) skip the frame and are recorded; nothing is thrown.
  std::optional<FrameTiming> process(const FrameRecord& frame);

  const Mesh& mesh() const { return mesh_; }
  const PipelineConfig& config() const { return cfg_; }
  const fusion::TextureAccumulator& texture() const { return accumulator_; }
  const raster::DepthBuffer& depth() const { return depth_; }
  const raster::DiscontinuityMask& discontinuities() const { return mask_; }
  const raster::TexelSampleMap& samples() const { return samples_; }
  const fusion::IncrementPatch& increment() const { return increment_; }
  const std::vector<SkippedFrame>& skipped() const { return skipped_; }

 private:
  Mesh mesh_;
  PipelineConfig cfg_;
  exposure::Normalizer normalizer_;
  fusion::TextureAccumulator accumulator_;
  raster::DepthBuffer depth_;
  raster::DiscontinuityMask mask_;
  raster::TexelSampleMap samples_;
  fusion::IncrementPatch increment_;
  std::vector<SkippedFrame> skipped_;
};

struct ReconstructionResult {
  RgbImage texture;
  Grid<std::uint8_t> score;
  std::vector<FrameTiming> timings;
  std::vector<SkippedFrame> skipped;
  std::vector<std::string> warnings;
  std::size_t frames = 0;
  std::size_t observed_texels = 0;
};

/// Loads mesh and sequence, reconstructs, and (when output_dir is set)
/// writes texture.png, score.png, timings.csv and report.json there.
ReconstructionResult run_reconstruction(const PipelineConfig& cfg);

Grid<std::uint8_t> depth_image(const raster::DepthBuffer& depth);

struct GroundTruthInstance {
  int frame = 0;
  std::string texture_id;
  RigidPose pose;  // object-to-camera
};

struct FrameCandidate {
  int frame = 0;
  matcher::Candidate candidate;
};

std::vector<GroundTruthInstance> load_ground_truth(const std::filesystem::path& path);
void write_ground_truth(const std::filesystem::path& path, const std::vector<GroundTruthInstance>& gt);
std::vector<FrameCandidate> load_candidates(const std::filesystem::path& path);
void write_candidates(const std::filesystem::path& path, const std::vector<FrameCandidate>& candidates);

inline constexpr double kTruePositiveRadius = 0.11;

/// Camera-space position of the object origin implied by a candidate: the
/// template's origin pixel shifted to the candidate, at the template (or
/// depth bin) distance along the viewing ray.
Eigen::Vector3d estimate_position(const matcher::Candidate& candidate, const matcher::HueTemplate& tpl,
                                  const PinholeCamera& camera);

struct AssignmentRecord {
  int frame = 0;
  matcher::Assignment assignment;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  bool true_positive = false;
};

struct EvalReport {
  double true_positive_rate = 0.0;
  double assignment_accuracy = 0.0;  // assignments that are true positives
  std::size_t frames = 0;
  std::size_t candidates = 0;       // in the input
  std::size_t candidates_used = 0;  // actually inspected
  std::size_t assignments = 0;
  std::size_t ground_truth = 0;
  std::size_t true_positives = 0;
  std::vector<double> frame_ms;   // classification time per frame
  std::vector<double> lookup_ms;  // per expected-hue template lookup
  std::vector<AssignmentRecord> records;
};

struct EvalInputs {
  std::filesystem::path frames_dir;  // frame_%06d.png and camera.txt
  std::vector<GroundTruthInstance> ground_truth;
  std::vector<FrameCandidate> candidates;
  const matcher::TemplateStore* templates = nullptr;
  std::vector<matcher::InstanceHypothesis> hypotheses;
  double radius = kTruePositiveRadius;
  matcher::ClassifyConfig classify;
};

/// Throws Error{frame_mismatch} when candidates name a frame without ground
/// truth or a frame image is missing.
EvalReport run_detection_eval(const EvalInputs& in);

void write_eval_report(const std::filesystem::path& dir, const EvalReport& report);

struct TimingStats {
  std::size_t count = 0;
  double mean = 0, median = 0, max = 0;
};

TimingStats summarize(std::vector<double> values);

struct TimingTable {
  std::optional<TimingStats> accumulate;
  std::optional<TimingStats> lookup;
};

/// Reads timings.csv and lookup_timings.csv from a run directory; missing
/// files leave the row empty.
TimingTable report_timings(const std::filesystem::path& run_dir);
std::string format_timing_table(const TimingTable& table);
/// At least two significant digits.
std::string format_ms(double ms);

}  // namespace livetex
