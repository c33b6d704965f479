#include "mitodet/tiler.hpp"

#include <string>

#include "mitodet/error.hpp"

namespace mitodet {

TileGridConfig TileGridConfig::from_overlap(int tile_size, int overlap) {
  TileGridConfig cfg{tile_size, tile_size - overlap};
  cfg.validate();
  return cfg;
}

void TileGridConfig::validate() const {
  if (tile_size <= 0) throw InvalidArgument("tile_size must be positive");
  if (stride <= 0 || stride > tile_size) {
    throw InvalidArgument("stride must satisfy 0 < stride <= tile_size (got stride " +
                          std::to_string(stride) + ", tile_size " +
                          std::to_string(tile_size) + ")");
  }
}

std::vector<int> axis_origins(int extent, int tile_size, int stride) {
  if (extent <= tile_size) return {0};
  std::vector<int> origins;
  for (int p = 0; p + tile_size <= extent; p += stride) origins.push_back(p);
  if (origins.back() + tile_size < extent) origins.push_back(extent - tile_size);
  return origins;
}

TileGrid plan_grid(const RoiSpec& roi, const TileGridConfig& config) {
  roi.validate();
  config.validate();

  const auto xs = axis_origins(roi.width_px, config.tile_size, config.stride);
  const auto ys = axis_origins(roi.height_px, config.tile_size, config.stride);
  const bool pad_x = roi.width_px < config.tile_size;
  const bool pad_y = roi.height_px < config.tile_size;

  TileGrid grid{roi, config, static_cast<int>(ys.size()), static_cast<int>(xs.size()), {}};
  grid.tiles.reserve(xs.size() * ys.size());
  for (std::size_t r = 0; r < ys.size(); ++r) {
    for (std::size_t c = 0; c < xs.size(); ++c) {
      TileSpec t;
      t.index = grid.tiles.size();
      t.row = static_cast<int>(r);
      t.col = static_cast<int>(c);
      t.origin_x = xs[c];
      t.origin_y = ys[r];
      t.size = config.tile_size;
      t.clamped = (xs[c] % config.stride != 0) || (ys[r] % config.stride != 0);
      t.padded = pad_x || pad_y;
      grid.tiles.push_back(t);
    }
  }
  return grid;
}

std::vector<TileAssignment> assign_annotations(const TileGrid& grid,
                                               const std::vector<Annotation>& annotations) {
  std::vector<TileAssignment> out(grid.tiles.size());
  for (const auto& ann : annotations) {
    validate_annotation(ann, grid.roi);
    for (const auto& tile : grid.tiles) {
      const double lx = ann.center.x - tile.origin_x;
      const double ly = ann.center.y - tile.origin_y;
      if (lx >= 0.0 && lx < tile.size && ly >= 0.0 && ly < tile.size) {
        auto& slot = out[tile.index];
        slot.annotations.push_back({{lx, ly}, ann.label});
        slot.background = false;
      }
    }
  }
  return out;
}

Detection remap_to_roi(const Detection& local, const TileSpec& tile) {
  const auto& b = local.box;
  const double s = tile.size;
  if (b.x_min() < 0.0 || b.y_min() < 0.0 || b.x_max() > s || b.y_max() > s) {
    throw FrameError("tile-local box " + to_string(b) + " exceeds tile extent " +
                     std::to_string(tile.size));
  }
  Detection out = local;
  out.box = b.translated(tile.origin_x, tile.origin_y);
  return out;
}

}  // namespace mitodet
