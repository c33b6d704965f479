#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mitodet/detect.hpp"
#include "mitodet/eval.hpp"
#include "mitodet/fusion.hpp"
#include "mitodet/image.hpp"
#include "mitodet/stain.hpp"
#include "mitodet/tiler.hpp"

namespace mitodet {

/// Fully resolved run configuration. Serialized field names match the
/// member names.
struct PipelineConfig {
  int tile_size = 640;
  int stride = 480;
  double nms_iou = 0.7;
  double wbf_iou = 0.55;
  ScoreMode score_mode = ScoreMode::kMean;
  std::size_t support_T = 3;
  std::vector<TtaVariant> tta{TtaVariant::kIdentity, TtaVariant::kHFlip, TtaVariant::kVFlip};
  double conf_threshold = 0.25;
  double stain_apply_probability = 0.25;
  std::uint64_t seed = 0;
  double mpp = 0.25;
  double dist_thresh_um = 7.5;
  std::size_t threads = 1;

  TileGridConfig grid() const { return {tile_size, stride}; }
  FusionConfig fusion() const;
  MatchConfig matching() const { return {dist_thresh_um}; }
  void validate() const;
};

std::string pipeline_config_to_json(const PipelineConfig& config);
/// Missing fields keep their defaults; unknown fields are rejected.
PipelineConfig pipeline_config_from_json(const std::string& text,
                                         PipelineConfig base = {});

std::string fusion_config_to_json(const FusionConfig& config);
FusionConfig fusion_config_from_json(const std::string& text);

/// Mock settings as stored in mock.json. Ground truth comes from the path
/// in `ground_truth` (relative to the JSON file) or from the run's --gt.
struct MockSettings {
  double box_size = 50.0;
  double score_mean = 0.9;
  double score_jitter = 0.0;
  double position_jitter = 0.0;
  double false_positive_rate = 0.0;
  double fp_score_mean = 0.3;
  double fp_score_jitter = 0.1;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> ground_truth;
};

MockSettings mock_settings_from_json(const std::string& text);
std::string mock_settings_to_json(const MockSettings& settings);

struct RoiInput {
  RoiSpec roi;
  RgbImage image;
  std::vector<Annotation> ground_truth;  // evaluation truth, may be empty
  bool has_ground_truth = false;
  std::vector<Annotation> planted;       // what the mock detector reports
};

/// Detector choice for a run: the mock (per-ROI planted truth) or one shared
/// backend instance.
struct BackendSelection {
  std::optional<MockSettings> mock;
  std::shared_ptr<const DetectorBackend> shared;
};

struct RoiResult {
  std::string roi_id;
  TileGrid grid;
  TileDetections raw;  // detector output per (tile, variant), variant frame
  std::vector<Detection> fused;
  StitchStats stats;
  std::size_t stain_normalized_tiles = 0;
};

struct PipelineResult {
  std::vector<RoiResult> rois;
  std::optional<EvalReport> report;
};

/// Tiles every ROI, optionally stain-augments tiles, runs the detector
/// under each TTA variant on a worker pool, stitches, and evaluates when
/// ground truth is present. Output does not depend on `threads`.
PipelineResult run_pipeline(const std::vector<RoiInput>& rois, const PipelineConfig& config,
                            const BackendSelection& backend,
                            const StainBank* bank = nullptr);

/// Builds the mock backend for one ROI from settings and planted truth.
MockBackend make_mock_backend(const MockSettings& settings, const TileGrid& grid,
                              const std::vector<Annotation>& planted, std::uint64_t root_seed);

}  // namespace mitodet
