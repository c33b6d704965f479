#include "mitodet/detect.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mitodet/error.hpp"
#include "mitodet/random.hpp"

namespace mitodet {

void MockBackendConfig::validate() const {
  if (tile_size <= 0) throw InvalidArgument("mock tile_size must be positive");
  if (!(box_size > 0.0)) throw InvalidArgument("mock box_size must be positive");
  if (score_jitter < 0.0 || position_jitter < 0.0 || fp_score_jitter < 0.0) {
    throw InvalidArgument("mock jitters must be non-negative");
  }
  if (false_positive_rate < 0.0) {
    throw InvalidArgument("mock false_positive_rate must be non-negative");
  }
}

MockBackend::MockBackend(MockBackendConfig config) : config_(std::move(config)) {
  config_.validate();
}

namespace {

Point to_variant_frame(Point p, TtaVariant variant, double size) {
  switch (variant) {
    case TtaVariant::kIdentity: return p;
    case TtaVariant::kHFlip: return {size - p.x, p.y};
    case TtaVariant::kVFlip: return {p.x, size - p.y};
    case TtaVariant::kHVFlip: return {size - p.x, size - p.y};
  }
  return p;
}

PixelBox box_around(Point c, double box_size, double tile) {
  const double cx = std::clamp(c.x, 0.0, tile);
  const double cy = std::clamp(c.y, 0.0, tile);
  const double half = 0.5 * box_size;
  return {std::max(cx - half, 0.0), std::max(cy - half, 0.0), std::min(cx + half, tile),
          std::min(cy + half, tile)};
}

}  // namespace

std::vector<Detection> MockBackend::detect(const RgbImage& tile, const TileKey& key) const {
  if (tile.width() != config_.tile_size || tile.height() != config_.tile_size) {
    throw BackendError("mock backend expects " + std::to_string(config_.tile_size) + "x" +
                       std::to_string(config_.tile_size) + " tiles");
  }
  const double size = config_.tile_size;
  Rng rng = Rng::derive(config_.seed, "mock",
                        key.tile_index * 4 + static_cast<std::uint64_t>(key.variant));
  const Provenance prov{key.tile_index, key.variant};

  std::vector<Detection> out;
  if (const auto it = config_.ground_truth.find(key.tile_index);
      it != config_.ground_truth.end()) {
    for (const auto& ann : it->second) {
      Point c = to_variant_frame(ann.center, key.variant, size);
      c.x = rng.normal(c.x, config_.position_jitter);
      c.y = rng.normal(c.y, config_.position_jitter);
      const double score = std::clamp(rng.normal(config_.score_mean, config_.score_jitter), 0.0, 1.0);
      out.emplace_back(box_around(c, config_.box_size, size), score, ann.label, prov);
    }
  }
  const std::size_t n_fp = rng.poisson(config_.false_positive_rate);
  for (std::size_t i = 0; i < n_fp; ++i) {
    const Point c{rng.uniform01() * size, rng.uniform01() * size};
    const double score =
        std::clamp(rng.normal(config_.fp_score_mean, config_.fp_score_jitter), 0.0, 1.0);
    out.emplace_back(box_around(c, config_.box_size, size), score, Label::kMitoticFigure, prov);
  }
  return out;
}

std::vector<Detection> filter_by_confidence(const std::vector<Detection>& dets,
                                            double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw InvalidArgument("confidence threshold must lie in [0, 1]");
  }
  std::vector<Detection> out;
  for (const auto& d : dets) {
    if (d.label == Label::kMitoticFigure && d.score >= threshold) out.push_back(d);
  }
  return out;
}

std::vector<Detection> drop_hard_negatives(const std::vector<Detection>& dets) {
  std::vector<Detection> out;
  std::copy_if(dets.begin(), dets.end(), std::back_inserter(out),
               [](const Detection& d) { return d.label == Label::kMitoticFigure; });
  return out;
}

std::vector<Detection> detect_checked(const DetectorBackend& backend, const RgbImage& tile,
                                      const TileKey& key) {
  auto dets = backend.detect(tile, key);
  const double size = backend.tile_size();
  for (const auto& d : dets) {
    const auto& b = d.box;
    if (b.x_min() < 0.0 || b.y_min() < 0.0 || b.x_max() > size || b.y_max() > size) {
      throw BackendError(backend.name() + " returned box " + to_string(b) +
                         " outside the tile");
    }
  }
  return dets;
}

YoloOutputLayout infer_yolo_layout(std::span<const std::int64_t> shape,
                                   std::size_t num_classes) {
  const auto attrs = static_cast<std::int64_t>(4 + num_classes);
  auto describe = [&] {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
    os << ']';
    return os.str();
  };
  if (shape.size() != 3 || shape[0] != 1) {
    throw BackendError("expected model output of shape [1, N, " + std::to_string(attrs) +
                       "] or [1, " + std::to_string(attrs) + ", N], got " + describe());
  }
  if (shape[2] == attrs && shape[1] > 0) {
    return {static_cast<std::size_t>(shape[1]), num_classes, false};
  }
  if (shape[1] == attrs && shape[2] > 0) {
    return {static_cast<std::size_t>(shape[2]), num_classes, true};
  }
  throw BackendError("model output " + describe() + " has no axis of size " +
                     std::to_string(attrs) + " (4 box values + class scores)");
}

std::vector<Detection> decode_yolo_output(std::span<const float> output,
                                          const YoloOutputLayout& layout, int tile_size,
                                          double min_score) {
  const std::size_t attrs = 4 + layout.num_classes;
  if (output.size() != attrs * layout.num_candidates) {
    throw BackendError("model output holds " + std::to_string(output.size()) +
                       " values, expected " + std::to_string(attrs * layout.num_candidates));
  }
  auto at = [&](std::size_t cand, std::size_t attr) -> double {
    return layout.transposed ? output[attr * layout.num_candidates + cand]
                             : output[cand * attrs + attr];
  };
  const double size = tile_size;
  std::vector<Detection> out;
  for (std::size_t i = 0; i < layout.num_candidates; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < layout.num_classes; ++c) {
      if (at(i, 4 + c) > at(i, 4 + best)) best = c;
    }
    const double score = std::clamp(at(i, 4 + best), 0.0, 1.0);
    if (score < min_score) continue;
    const double cx = at(i, 0), cy = at(i, 1), w = at(i, 2), h = at(i, 3);
    const double x0 = std::clamp(cx - 0.5 * w, 0.0, size);
    const double y0 = std::clamp(cy - 0.5 * h, 0.0, size);
    const double x1 = std::clamp(cx + 0.5 * w, 0.0, size);
    const double y1 = std::clamp(cy + 0.5 * h, 0.0, size);
    if (!PixelBox::valid(x0, y0, x1, y1)) continue;
    out.emplace_back(PixelBox{x0, y0, x1, y1}, score,
                     best == 0 ? Label::kMitoticFigure : Label::kHardNegative);
  }
  return out;
}

std::vector<float> tile_to_tensor(const RgbImage& tile) {
  const std::size_t plane = tile.pixel_count();
  std::vector<float> tensor(3 * plane);
  const auto data = tile.data();
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      tensor[c * plane + i] = static_cast<float>(data[3 * i + c]) / 255.0f;
    }
  }
  return tensor;
}

}  // namespace mitodet
