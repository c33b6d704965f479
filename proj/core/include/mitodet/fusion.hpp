#pragma once

#include <cstddef>
#include <map>
#include <string_view>
#include <utility>
#include <vector>

#include "mitodet/image.hpp"
#include "mitodet/tiler.hpp"
#include "mitodet/types.hpp"

namespace mitodet {

enum class ScoreMode {
  kMean,               // mean member score
  kRescaleBySupport,   // mean * min(n, T) / T
};

std::string_view to_string(ScoreMode mode);
ScoreMode parse_score_mode(std::string_view text);

struct FusionConfig {
  double nms_iou = 0.7;
  double wbf_iou = 0.55;
  ScoreMode score_mode = ScoreMode::kMean;
  std::size_t support_T = 3;
  double conf_threshold = 0.25;
  std::vector<TtaVariant> tta{TtaVariant::kIdentity, TtaVariant::kHFlip, TtaVariant::kVFlip};

  void validate() const;
};

/// Strict total order used everywhere detections are ranked: descending
/// score, then ascending (x_min, y_min, x_max, y_max), label and provenance.
bool ranks_before(const Detection& a, const Detection& b) noexcept;

void sort_by_rank(std::vector<Detection>& dets);

/// Flips square tile pixels for `variant`.
RgbImage apply_tta(const RgbImage& tile, TtaVariant variant);

/// Maps boxes predicted on a flipped tile back to the unflipped frame.
/// Throws FrameError for boxes outside [0, tile_size]^2.
std::vector<Detection> invert_boxes(const std::vector<Detection>& dets, TtaVariant variant,
                                    double tile_size);

/// Greedy NMS within each label: keep the best-ranked box, drop same-label
/// boxes with iou > iou_thresh against it, repeat. Output in rank order.
std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_thresh = 0.7);

/// Weighted Boxes Fusion within each label. Detections are visited in rank
/// order and join the first cluster whose current fused box has
/// iou > iou_thresh; fused coordinates are the score-weighted member mean.
std::vector<Detection> wbf(const std::vector<Detection>& dets, double iou_thresh,
                           ScoreMode score_mode = ScoreMode::kMean,
                           std::size_t support_T = 1);

using TileDetections = std::map<std::pair<std::size_t, TtaVariant>, std::vector<Detection>>;

struct StitchStats {
  std::size_t raw = 0;              // detections entering the stage
  std::size_t after_nms = 0;
  std::size_t outside_roi = 0;      // dropped: box fell entirely in padding
  std::size_t after_wbf = 0;
  std::size_t output = 0;
};

/// Per (tile, variant): NMS -> invert_boxes -> remap_to_roi -> clip_to_roi;
/// then WBF over the whole ROI and the confidence filter. Boxes that land
/// entirely in the padded area of an undersized ROI are dropped and counted.
std::vector<Detection> stitch(const TileDetections& per_tile, const TileGrid& grid,
                              const FusionConfig& config, StitchStats* stats = nullptr);

}  // namespace mitodet
