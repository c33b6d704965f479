#include "mitodet/fusion.hpp"

#include <algorithm>
#include <string>
#include <tuple>

#include "mitodet/detect.hpp"
#include "mitodet/error.hpp"

namespace mitodet {

std::string_view to_string(ScoreMode mode) {
  switch (mode) {
    case ScoreMode::kMean: return "mean";
    case ScoreMode::kRescaleBySupport: return "rescale_by_support";
  }
  return "unknown";
}

ScoreMode parse_score_mode(std::string_view text) {
  if (text == "mean") return ScoreMode::kMean;
  if (text == "rescale_by_support") return ScoreMode::kRescaleBySupport;
  throw InvalidArgument("unknown score_mode '" + std::string(text) + "'");
}

void FusionConfig::validate() const {
  auto in_open_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!in_open_unit(nms_iou)) throw InvalidArgument("nms_iou must lie in (0, 1)");
  if (!in_open_unit(wbf_iou)) throw InvalidArgument("wbf_iou must lie in (0, 1)");
  if (support_T == 0) throw InvalidArgument("support_T must be positive");
  if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0)) {
    throw InvalidArgument("conf_threshold must lie in [0, 1]");
  }
  if (std::find(tta.begin(), tta.end(), TtaVariant::kIdentity) == tta.end()) {
    throw InvalidArgument("the TTA set must contain identity");
  }
  for (std::size_t i = 0; i < tta.size(); ++i) {
    for (std::size_t j = i + 1; j < tta.size(); ++j) {
      if (tta[i] == tta[j]) throw InvalidArgument("duplicate TTA variant");
    }
  }
}

namespace {

auto rank_key(const Detection& d) {
  const bool has_prov = d.provenance.has_value();
  const std::size_t tile = has_prov ? d.provenance->tile_index : 0;
  const int variant = has_prov ? static_cast<int>(d.provenance->variant) : 0;
  return std::make_tuple(-d.score, d.box.x_min(), d.box.y_min(), d.box.x_max(),
                         d.box.y_max(), static_cast<int>(d.label), has_prov, tile, variant);
}

}  // namespace

bool ranks_before(const Detection& a, const Detection& b) noexcept {
  return rank_key(a) < rank_key(b);
}

void sort_by_rank(std::vector<Detection>& dets) {
  std::sort(dets.begin(), dets.end(), ranks_before);
}

RgbImage apply_tta(const RgbImage& tile, TtaVariant variant) {
  if (tile.width() != tile.height()) throw InvalidArgument("TTA expects a square tile");
  if (variant == TtaVariant::kIdentity) return tile;
  const bool flip_x = variant == TtaVariant::kHFlip || variant == TtaVariant::kHVFlip;
  const bool flip_y = variant == TtaVariant::kVFlip || variant == TtaVariant::kHVFlip;
  const int n = tile.width();
  RgbImage out(n, n, 0);
  for (int y = 0; y < n; ++y) {
    const int sy = flip_y ? n - 1 - y : y;
    for (int x = 0; x < n; ++x) {
      const int sx = flip_x ? n - 1 - x : x;
      std::copy_n(tile.pixel(sx, sy), 3, out.pixel(x, y));
    }
  }
  return out;
}

std::vector<Detection> invert_boxes(const std::vector<Detection>& dets, TtaVariant variant,
                                    double tile_size) {
  const bool flip_x = variant == TtaVariant::kHFlip || variant == TtaVariant::kHVFlip;
  const bool flip_y = variant == TtaVariant::kVFlip || variant == TtaVariant::kHVFlip;
  std::vector<Detection> out;
  out.reserve(dets.size());
  for (const auto& d : dets) {
    const auto& b = d.box;
    if (b.x_min() < 0.0 || b.y_min() < 0.0 || b.x_max() > tile_size || b.y_max() > tile_size) {
      throw FrameError("box " + to_string(b) + " outside the TTA tile frame");
    }
    const double x0 = flip_x ? tile_size - b.x_max() : b.x_min();
    const double x1 = flip_x ? tile_size - b.x_min() : b.x_max();
    const double y0 = flip_y ? tile_size - b.y_max() : b.y_min();
    const double y1 = flip_y ? tile_size - b.y_min() : b.y_max();
    Detection inv = d;
    inv.box = PixelBox{x0, y0, x1, y1};
    out.push_back(std::move(inv));
  }
  return out;
}

std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_thresh) {
  std::vector<Detection> sorted = dets;
  sort_by_rank(sorted);
  std::vector<bool> suppressed(sorted.size(), false);
  std::vector<Detection> kept;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (suppressed[i]) continue;
    kept.push_back(sorted[i]);
    for (std::size_t j = i + 1; j < sorted.size(); ++j) {
      if (!suppressed[j] && sorted[j].label == sorted[i].label &&
          iou(sorted[i].box, sorted[j].box) > iou_thresh) {
        suppressed[j] = true;
      }
    }
  }
  return kept;
}

namespace {

class Cluster {
 public:
  explicit Cluster(const Detection& first) : first_(first), fused_(first.box) { add(first); }

  const PixelBox& fused() const noexcept { return fused_; }

  void add(const Detection& d) {
    const auto& b = d.box;
    ++count_;
    score_sum_ += d.score;
    weighted_[0] += d.score * b.x_min();
    weighted_[1] += d.score * b.y_min();
    weighted_[2] += d.score * b.x_max();
    weighted_[3] += d.score * b.y_max();
    plain_[0] += b.x_min();
    plain_[1] += b.y_min();
    plain_[2] += b.x_max();
    plain_[3] += b.y_max();
    if (score_sum_ > 0.0) {
      fused_ = PixelBox{weighted_[0] / score_sum_, weighted_[1] / score_sum_,
                        weighted_[2] / score_sum_, weighted_[3] / score_sum_};
    } else {
      // All-zero scores: fall back to the unweighted mean.
      const double n = static_cast<double>(count_);
      fused_ = PixelBox{plain_[0] / n, plain_[1] / n, plain_[2] / n, plain_[3] / n};
    }
  }

  Detection fused_detection(ScoreMode mode, std::size_t support_T) const {
    const double n = static_cast<double>(count_);
    double score = score_sum_ / n;
    if (mode == ScoreMode::kRescaleBySupport) {
      const double t = static_cast<double>(support_T);
      score *= std::min(n, t) / t;
    }
    return Detection{fused_, std::clamp(score, 0.0, 1.0), first_.label, first_.provenance};
  }

 private:
  Detection first_;
  PixelBox fused_;
  std::size_t count_ = 0;
  double score_sum_ = 0.0;
  double weighted_[4] = {0.0, 0.0, 0.0, 0.0};
  double plain_[4] = {0.0, 0.0, 0.0, 0.0};
};

}  // namespace

std::vector<Detection> wbf(const std::vector<Detection>& dets, double iou_thresh,
                           ScoreMode score_mode, std::size_t support_T) {
  if (support_T == 0) throw InvalidArgument("support_T must be positive");
  std::vector<Detection> sorted = dets;
  sort_by_rank(sorted);

  std::vector<Detection> out;
  for (const Label label : {Label::kMitoticFigure, Label::kHardNegative}) {
    std::vector<Cluster> clusters;
    for (const auto& d : sorted) {
      if (d.label != label) continue;
      auto it = std::find_if(clusters.begin(), clusters.end(), [&](const Cluster& c) {
        return iou(c.fused(), d.box) > iou_thresh;
      });
      if (it != clusters.end()) {
        it->add(d);
      } else {
        clusters.emplace_back(d);
      }
    }
    for (const auto& c : clusters) out.push_back(c.fused_detection(score_mode, support_T));
  }
  sort_by_rank(out);
  return out;
}

std::vector<Detection> stitch(const TileDetections& per_tile, const TileGrid& grid,
                              const FusionConfig& config, StitchStats* stats) {
  config.validate();
  StitchStats local;
  std::vector<Detection> roi_dets;
  for (const auto& [key, dets] : per_tile) {
    const auto [tile_index, variant] = key;
    if (tile_index >= grid.tiles.size()) {
      throw FrameError("detections reference tile " + std::to_string(tile_index) +
                       " but the grid has " + std::to_string(grid.tiles.size()));
    }
    if (std::find(config.tta.begin(), config.tta.end(), variant) == config.tta.end()) {
      throw FrameError("detections reference undeclared TTA variant '" +
                       std::string(to_string(variant)) + "'");
    }
    const TileSpec& tile = grid.tiles[tile_index];
    local.raw += dets.size();

    std::vector<Detection> tagged = dets;
    for (auto& d : tagged) d.provenance = Provenance{tile_index, variant};

    const auto kept = nms(tagged, config.nms_iou);
    local.after_nms += kept.size();
    for (const auto& d : invert_boxes(kept, variant, tile.size)) {
      Detection roi_det = remap_to_roi(d, tile);
      const auto& b = roi_det.box;
      if (b.x_min() >= grid.roi.width_px || b.y_min() >= grid.roi.height_px) {
        ++local.outside_roi;
        continue;
      }
      roi_det.box = clip_to_roi(b, grid.roi);
      roi_dets.push_back(std::move(roi_det));
    }
  }

  auto fused = wbf(roi_dets, config.wbf_iou, config.score_mode, config.support_T);
  local.after_wbf = fused.size();
  auto out = filter_by_confidence(fused, config.conf_threshold);
  local.output = out.size();
  if (stats) *stats = local;
  return out;
}

}  // namespace mitodet
