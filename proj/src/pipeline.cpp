#include "livetex/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "livetex/error.hpp"
#include "livetex/png_io.hpp"

namespace livetex {

using json = nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::invalid_argument, "option '" + key + "' expects a boolean, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size())
    throw Error(ErrorCode::invalid_argument, "option '" + key + "' expects a number, got '" + v + "'");
  return out;
}

int parse_int(const std::string& key, const std::string& v) {
  const double d = parse_double(key, v);
  if (d != std::floor(d) || std::abs(d) > 1e9)
    throw Error(ErrorCode::invalid_argument, "option '" + key + "' expects an integer, got '" + v + "'");
  return static_cast<int>(d);
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

Grid<std::uint8_t> mask_image(const Mask& m) {
  Grid<std::uint8_t> out(m.width(), m.height(), 0);
  auto src = m.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 255 : 0;
  return out;
}

RgbImage increment_image(const fusion::IncrementPatch& patch) {
  RgbImage out(patch.size(), patch.size());
  for (int y = patch.bounds.y0; y <= patch.bounds.y1 && patch.present_count; ++y)
    for (int x = patch.bounds.x0; x <= patch.bounds.x1; ++x)
      if (patch.present(x, y)) out(x, y) = patch.color(x, y);
  return out;
}

std::string indexed(const char* stem, int index, const char* suffix) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s_%06d%s", stem, index, suffix);
  return buf;
}

}  // namespace

void PipelineConfig::validate() const {
  const int n = raster.texture_size;
  if (n < 64 || n > 4096 || (n & (n - 1)) != 0)
    throw Error(ErrorCode::invalid_argument,
                "texture size must be a power of two between 64 and 4096, got " + std::to_string(n));
  if (blend_ramp < 0) throw Error(ErrorCode::invalid_argument, "blend ramp must be >= 0");
  raster.validate();
  if (!(matcher.inlier_threshold >= 0.0 && matcher.inlier_threshold <= 1.0))
    throw Error(ErrorCode::invalid_argument, "inlier threshold must lie in [0, 1]");
  if (!(matcher.max_hue_distance >= 0.f && matcher.max_hue_distance <= 180.f))
    throw Error(ErrorCode::invalid_argument, "hue threshold must lie in [0, 180] degrees");
}

std::string to_string(fusion::MergeMode mode) { return mode == fusion::MergeMode::mean ? "mean" : "argmax"; }
std::string to_string(exposure::Mode mode) { return mode == exposure::Mode::off ? "off" : "first-frame"; }

void set_config_option(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "mesh") {
    cfg.mesh_path = value;
  } else if (key == "sequence") {
    cfg.sequence_path = value;
  } else if (key == "out") {
    cfg.output_dir = value;
  } else if (key == "texture-size") {
    cfg.raster.texture_size = parse_int(key, value);
  } else if (key == "merge-mode") {
    if (value == "mean")
      cfg.merge_mode = fusion::MergeMode::mean;
    else if (value == "argmax")
      cfg.merge_mode = fusion::MergeMode::argmax;
    else
      throw Error(ErrorCode::invalid_argument, "merge mode must be 'mean' or 'argmax', got '" + value + "'");
  } else if (key == "exposure") {
    if (value == "first-frame")
      cfg.exposure_mode = exposure::Mode::first_frame;
    else if (value == "off")
      cfg.exposure_mode = exposure::Mode::off;
    else
      throw Error(ErrorCode::invalid_argument, "exposure must be 'first-frame' or 'off', got '" + value + "'");
  } else if (key == "depth-resolution") {
    cfg.raster.depth_resolution = parse_double(key, value);
  } else if (key == "edge-depth-fraction") {
    cfg.raster.edge_depth_fraction = parse_double(key, value);
  } else if (key == "edge-dilation") {
    cfg.raster.edge_dilation_px = parse_int(key, value);
  } else if (key == "blend-ramp") {
    cfg.blend_ramp = parse_int(key, value);
  } else if (key == "inlier-threshold") {
    cfg.matcher.inlier_threshold = parse_double(key, value);
  } else if (key == "hue-threshold") {
    cfg.matcher.max_hue_distance = static_cast<float>(parse_double(key, value));
  } else if (key == "max-candidates") {
    cfg.matcher.max_candidates = static_cast<std::size_t>(std::max(0, parse_int(key, value)));
  } else if (key == "v-black") {
    cfg.matcher.hue.v_black = static_cast<float>(parse_double(key, value));
  } else if (key == "v-white") {
    cfg.matcher.hue.v_white = static_cast<float>(parse_double(key, value));
  } else if (key == "s-white") {
    cfg.matcher.hue.s_white = static_cast<float>(parse_double(key, value));
  } else if (key == "s-min") {
    cfg.matcher.hue.s_min = static_cast<float>(parse_double(key, value));
  } else if (key == "dump-debug") {
    cfg.dump_debug = parse_bool(key, value);
  } else if (key == "dump-merge-maps") {
    cfg.dump_merge_maps = parse_bool(key, value);
  } else {
    throw Error(ErrorCode::invalid_argument, "unknown option '" + key + "'");
  }
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open config " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::parse, path.string() + ":" + std::to_string(line_no) + ": expected 'key = value'");
    try {
      set_config_option(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

Reconstructor::Reconstructor(Mesh mesh, PipelineConfig cfg)
    : mesh_(std::move(mesh)),
      cfg_(std::move(cfg)),
      normalizer_(cfg_.exposure_mode),
      accumulator_((cfg_.validate(), cfg_.raster.texture_size), cfg_.merge_mode) {}

std::optional<FrameTiming> Reconstructor::process(const FrameRecord& frame) {
  FrameTiming t;
  t.frame = frame.index;
  try {
    if (frame.image.width() != frame.camera.width || frame.image.height() != frame.camera.height)
      throw Error(ErrorCode::frame_mismatch, "image size does not match the camera");
    const auto start = Clock::now();

    auto t0 = Clock::now();
    const RgbImage* image = &frame.image;
    RgbImage normalized;
    if (cfg_.exposure_mode != exposure::Mode::off) {
      normalized = normalizer_.apply(frame.image);
      image = &normalized;
    }
    t.exposure_ms = ms_since(t0);

    t0 = Clock::now();
    const PinholeCamera focus = raster::focus_camera(frame.camera, mesh_, frame.pose);
    t.focus_ms = ms_since(t0);

    t0 = Clock::now();
    raster::render_biased_depth(mesh_, focus, frame.pose, cfg_.raster, depth_);
    t.depth_ms = ms_since(t0);

    t0 = Clock::now();
    raster::discontinuity_mask(depth_, mesh_.diameter, cfg_.raster, mask_);
    t.mask_ms = ms_since(t0);

    t0 = Clock::now();
    raster::rasterize_texture_space(mesh_, frame.camera, frame.pose, depth_, mask_, cfg_.raster, samples_);
    t.texel_ms = ms_since(t0);

    t0 = Clock::now();
    fusion::extract_increment(*image, samples_, increment_);
    t.extract_ms = ms_since(t0);

    t0 = Clock::now();
    if (cfg_.blend_ramp > 0)
      fusion::blend_boundaries(increment_, cfg_.blend_ramp);
    else
      fusion::disable_blending(increment_);
    t.blend_ms = ms_since(t0);

    t0 = Clock::now();
    fusion::merge(accumulator_, increment_);
    t.merge_ms = ms_since(t0);

    t.total_ms = ms_since(start);
    t.texels = increment_.present_count;
  } catch (const Error& e) {
    skipped_.push_back({frame.index, std::string(to_string(e.code())), e.what()});
    return std::nullopt;
  }
  return t;
}

Grid<std::uint8_t> depth_image(const raster::DepthBuffer& depth) {
  Grid<std::uint8_t> out(depth.width(), depth.height(), 255);
  auto src = depth.depth.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i)
    if (src[i] != raster::kBackground) dst[i] = to_byte(src[i]);
  return out;
}

ReconstructionResult run_reconstruction(const PipelineConfig& cfg) {
  cfg.validate();
  Mesh mesh = load_mesh(cfg.mesh_path);
  SequenceReader reader(cfg.sequence_path);
  Reconstructor rec(std::move(mesh), cfg);

  const bool write = !cfg.output_dir.empty();
  if (write) {
    std::filesystem::create_directories(cfg.output_dir);
    if (cfg.dump_debug) std::filesystem::create_directories(cfg.output_dir / "debug");
    if (cfg.dump_merge_maps) std::filesystem::create_directories(cfg.output_dir / "merge_maps");
  }

  ReconstructionResult result;
  result.warnings = reader.warnings();
  while (auto frame = reader.next()) {
    ++result.frames;
    auto timing = rec.process(*frame);
    if (!timing) continue;
    result.timings.push_back(*timing);
    if (write && cfg.dump_debug) {
      const auto dir = cfg.output_dir / "debug";
      write_png_gray8(dir / indexed("depth", frame->index, ".png"), depth_image(rec.depth()));
      write_png_gray8(dir / indexed("mask", frame->index, ".png"), mask_image(rec.discontinuities().valid));
      write_png(dir / indexed("increment", frame->index, ".png"), increment_image(rec.increment()));
    }
    if (write && cfg.dump_merge_maps)
      write_png(cfg.output_dir / "merge_maps" / indexed("frame", frame->index, ".png"),
                fusion::merge_map(rec.texture(), rec.increment()));
  }
  result.texture = rec.texture().color();
  result.score = fusion::score_image(rec.texture());
  result.skipped = rec.skipped();
  result.observed_texels = rec.texture().observed_count();

  if (write) {
    write_png(cfg.output_dir / "texture.png", result.texture);
    write_png_gray8(cfg.output_dir / "score.png", result.score);

    std::ofstream csv(cfg.output_dir / "timings.csv");
    csv << "frame,exposure_ms,focus_ms,depth_ms,mask_ms,texel_ms,extract_ms,blend_ms,merge_ms,total_ms,texels\n";
    csv << std::fixed << std::setprecision(4);
    for (const auto& t : result.timings)
      csv << t.frame << ',' << t.exposure_ms << ',' << t.focus_ms << ',' << t.depth_ms << ',' << t.mask_ms << ','
          << t.texel_ms << ',' << t.extract_ms << ',' << t.blend_ms << ',' << t.merge_ms << ',' << t.total_ms << ','
          << t.texels << '\n';

    json report;
    report["frames"] = result.frames;
    report["processed"] = result.timings.size();
    report["observed_texels"] = result.observed_texels;
    report["texture_size"] = cfg.raster.texture_size;
    report["merge_mode"] = to_string(cfg.merge_mode);
    report["exposure"] = to_string(cfg.exposure_mode);
    report["skipped"] = json::array();
    for (const auto& s : result.skipped)
      report["skipped"].push_back({{"frame", s.frame}, {"code", s.code}, {"message", s.message}});
    report["warnings"] = result.warnings;
    std::ofstream(cfg.output_dir / "report.json") << report.dump(2) << '\n';
  }
  return result;
}

namespace {

json pose_json(const RigidPose& pose) {
  const Eigen::Matrix4d m = pose.matrix();
  json arr = json::array();
  for (int k = 0; k < 16; ++k) arr.push_back(m(k / 4, k % 4));
  return arr;
}

template <typename Fn>
void for_each_json_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace

std::vector<GroundTruthInstance> load_ground_truth(const std::filesystem::path& path) {
  std::vector<GroundTruthInstance> out;
  for_each_json_line(path, [&](const json& j) {
    GroundTruthInstance g;
    g.frame = j.at("frame").get<int>();
    g.texture_id = j.at("texture_id").get<std::string>();
    const auto& p = j.at("pose");
    if (!p.is_array() || p.size() != 16) throw Error(ErrorCode::parse, "pose needs 16 numbers");
    Eigen::Matrix4d m;
    for (int k = 0; k < 16; ++k) m(k / 4, k % 4) = p[static_cast<std::size_t>(k)].get<double>();
    g.pose = RigidPose::from_matrix(m);
    out.push_back(std::move(g));
  });
  return out;
}

void write_ground_truth(const std::filesystem::path& path, const std::vector<GroundTruthInstance>& gt) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  for (const auto& g : gt)
    out << json{{"frame", g.frame}, {"texture_id", g.texture_id}, {"pose", pose_json(g.pose)}}.dump() << '\n';
}

std::vector<FrameCandidate> load_candidates(const std::filesystem::path& path) {
  std::vector<FrameCandidate> out;
  for_each_json_line(path, [&](const json& j) {
    FrameCandidate c;
    c.frame = j.at("frame").get<int>();
    c.candidate.template_id = j.at("template_id").get<int>();
    c.candidate.x = j.at("x").get<int>();
    c.candidate.y = j.at("y").get<int>();
    c.candidate.score = j.value("score", 0.0);
    if (j.contains("depth_bin") && !j["depth_bin"].is_null()) c.candidate.depth_bin = j["depth_bin"].get<int>();
    out.push_back(c);
  });
  return out;
}

void write_candidates(const std::filesystem::path& path, const std::vector<FrameCandidate>& candidates) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  for (const auto& c : candidates) {
    json j{{"frame", c.frame},
           {"template_id", c.candidate.template_id},
           {"x", c.candidate.x},
           {"y", c.candidate.y},
           {"score", c.candidate.score}};
    j["depth_bin"] = c.candidate.depth_bin ? json(*c.candidate.depth_bin) : json(nullptr);
    out << j.dump() << '\n';
  }
}

Eigen::Vector3d estimate_position(const matcher::Candidate& candidate, const matcher::HueTemplate& tpl,
                                  const PinholeCamera& camera) {
  const Eigen::Vector2d pixel = Eigen::Vector2d(candidate.x, candidate.y) + tpl.origin;
  const Eigen::Vector3d ray((pixel.x() - camera.cx) / camera.fx, (pixel.y() - camera.cy) / camera.fy, 1.0);
  double distance = tpl.pose.translation.norm();
  if (candidate.depth_bin && *candidate.depth_bin >= 0 &&
      *candidate.depth_bin < static_cast<int>(std::size(matcher::kTemplateDistances)))
    distance = matcher::kTemplateDistances[*candidate.depth_bin];
  return ray.normalized() * distance;
}

EvalReport run_detection_eval(const EvalInputs& in) {
  if (!in.templates) throw Error(ErrorCode::invalid_argument, "no template store");
  std::set<int> frames;
  for (const auto& g : in.ground_truth) frames.insert(g.frame);
  std::map<int, std::vector<matcher::Candidate>> by_frame;
  for (const auto& c : in.candidates) {
    if (!frames.count(c.frame))
      throw Error(ErrorCode::frame_mismatch,
                  "candidate for frame " + std::to_string(c.frame) + " which has no ground truth");
    by_frame[c.frame].push_back(c.candidate);
  }

  EvalReport report;
  report.frames = frames.size();
  report.candidates = in.candidates.size();
  report.ground_truth = in.ground_truth.size();
  if (frames.empty()) return report;

  const PinholeCamera camera = load_camera(in.frames_dir / "camera.txt");
  for (int f : frames) {
    const auto path = frame_path(in.frames_dir, f);
    if (!std::filesystem::exists(path))
      throw Error(ErrorCode::frame_mismatch, "missing frame image " + path.string());
    const RgbImage image = read_png(path);
    if (image.width() != camera.width || image.height() != camera.height)
      throw Error(ErrorCode::frame_mismatch, path.string() + " does not match the camera size");

    std::vector<matcher::Candidate>& cands = by_frame[f];
    std::stable_sort(cands.begin(), cands.end(),
                     [](const matcher::Candidate& a, const matcher::Candidate& b) { return a.score > b.score; });

    const auto t0 = Clock::now();
    const matcher::HueImage hue = matcher::hue_descriptor(image, in.classify.hue);
    matcher::ClassifyStats stats;
    const auto assignments =
        matcher::classify_instances(hue, cands, *in.templates, in.hypotheses, in.classify, &stats);
    report.frame_ms.push_back(ms_since(t0));
    report.candidates_used += stats.candidates_used;
    report.lookup_ms.insert(report.lookup_ms.end(), stats.lookup_ms.begin(), stats.lookup_ms.end());

    std::vector<const GroundTruthInstance*> open;
    for (const auto& g : in.ground_truth)
      if (g.frame == f) open.push_back(&g);
    for (const auto& a : assignments) {
      AssignmentRecord rec;
      rec.frame = f;
      rec.assignment = a;
      rec.position = estimate_position(a.candidate, in.templates->at(a.candidate.template_id), camera);
      for (auto& g : open) {
        if (!g || g->texture_id != a.texture_id) continue;
        if ((g->pose.translation - rec.position).norm() <= in.radius) {
          rec.true_positive = true;
          g = nullptr;
          break;
        }
      }
      report.true_positives += rec.true_positive;
      report.records.push_back(rec);
    }
    report.assignments += assignments.size();
  }
  report.true_positive_rate =
      report.ground_truth ? static_cast<double>(report.true_positives) / static_cast<double>(report.ground_truth) : 0.0;
  report.assignment_accuracy =
      report.assignments ? static_cast<double>(report.true_positives) / static_cast<double>(report.assignments) : 0.0;
  return report;
}

void write_eval_report(const std::filesystem::path& dir, const EvalReport& report) {
  std::filesystem::create_directories(dir);
  json j;
  j["true_positive_rate"] = report.true_positive_rate;
  j["assignment_accuracy"] = report.assignment_accuracy;
  j["frames"] = report.frames;
  j["candidates"] = report.candidates;
  j["candidates_used"] = report.candidates_used;
  j["assignments"] = report.assignments;
  j["ground_truth"] = report.ground_truth;
  j["true_positives"] = report.true_positives;
  std::ofstream(dir / "report.json") << j.dump(2) << '\n';

  std::ofstream assignments(dir / "assignments.jsonl");
  for (const auto& r : report.records) {
    assignments << json{{"frame", r.frame},
                        {"candidate_index", r.assignment.candidate_index},
                        {"template_id", r.assignment.candidate.template_id},
                        {"x", r.assignment.candidate.x},
                        {"y", r.assignment.candidate.y},
                        {"texture_id", r.assignment.texture_id},
                        {"inlier_fraction", r.assignment.fraction},
                        {"position", {r.position.x(), r.position.y(), r.position.z()}},
                        {"true_positive", r.true_positive}}
                       .dump()
                << '\n';
  }
  std::ofstream lookups(dir / "lookup_timings.csv");
  lookups << "lookup_ms\n" << std::fixed << std::setprecision(5);
  for (double v : report.lookup_ms) lookups << v << '\n';
}

TimingStats summarize(std::vector<double> values) {
  TimingStats s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  const std::size_t n = values.size();
  s.median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  s.max = values.back();
  return s;
}

namespace {

std::optional<std::vector<double>> read_column(const std::filesystem::path& path, const std::string& column) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  if (!std::getline(in, line)) return std::vector<double>{};
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(trim(cell));
  }
  const auto it = std::find(header.begin(), header.end(), column);
  if (it == header.end()) throw Error(ErrorCode::parse, path.string() + ": no column '" + column + "'");
  const auto idx = static_cast<std::size_t>(it - header.begin());
  std::vector<double> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    for (std::size_t k = 0; k <= idx; ++k)
      if (!std::getline(ls, cell, ','))
        throw Error(ErrorCode::parse, path.string() + ":" + std::to_string(line_no) + ": short row");
    out.push_back(parse_double(column, trim(cell)));
  }
  return out;
}

}  // namespace

TimingTable report_timings(const std::filesystem::path& run_dir) {
  TimingTable t;
  if (auto v = read_column(run_dir / "timings.csv", "total_ms"); v && !v->empty()) t.accumulate = summarize(*v);
  if (auto v = read_column(run_dir / "lookup_timings.csv", "lookup_ms"); v && !v->empty()) t.lookup = summarize(*v);
  return t;
}

std::string format_ms(double ms) {
  char buf[32];
  if (ms >= 10.0)
    std::snprintf(buf, sizeof buf, "%.1f", ms);
  else if (ms >= 1.0)
    std::snprintf(buf, sizeof buf, "%.2f", ms);
  else
    std::snprintf(buf, sizeof buf, "%.3g", ms);
  return buf;
}

std::string format_timing_table(const TimingTable& table) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "step" << std::setw(8) << "count" << std::setw(12) << "mean_ms" << std::setw(12)
      << "median_ms" << "max_ms\n";
  auto row = [&](const char* name, const std::optional<TimingStats>& s) {
    if (!s) return;
    out << std::left << std::setw(12) << name << std::setw(8) << s->count << std::setw(12) << format_ms(s->mean)
        << std::setw(12) << format_ms(s->median) << format_ms(s->max) << '\n';
  };
  row("accumulate", table.accumulate);
  row("lookup", table.lookup);
  return out.str();
}

}  // namespace livetex
