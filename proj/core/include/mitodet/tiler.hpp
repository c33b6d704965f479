#pragma once

#include <cstddef>
#include <vector>

#include "mitodet/types.hpp"

namespace mitodet {

struct TileGridConfig {
  int tile_size = 640;
  int stride = 480;

  /// Dataset-export form: tile size plus overlap (stride = size - overlap).
  static TileGridConfig from_overlap(int tile_size, int overlap);

  int overlap() const noexcept { return tile_size - stride; }
  /// Throws InvalidArgument unless 0 < stride <= tile_size.
  void validate() const;

  friend bool operator==(const TileGridConfig&, const TileGridConfig&) = default;
};

struct TileSpec {
  std::size_t index = 0;  // position in row-major order
  int row = 0;
  int col = 0;
  int origin_x = 0;
  int origin_y = 0;
  int size = 0;
  /// Shifted back to extent - size on at least one axis.
  bool clamped = false;
  /// The ROI is smaller than one tile on at least one axis; pixels beyond the
  /// ROI read as white.
  bool padded = false;

  friend bool operator==(const TileSpec&, const TileSpec&) = default;
};

struct TileGrid {
  RoiSpec roi;
  TileGridConfig config;
  int rows = 0;
  int cols = 0;
  std::vector<TileSpec> tiles;  // row-major
};

/// Lattice origins along one axis: 0, stride, 2*stride, ... while the tile
/// fits, plus one clamped origin at extent - tile_size when pixels remain.
std::vector<int> axis_origins(int extent, int tile_size, int stride);

TileGrid plan_grid(const RoiSpec& roi, const TileGridConfig& config);

struct TileAssignment {
  std::vector<Annotation> annotations;  // tile-local coordinates
  bool background = true;
};

/// An annotation belongs to every tile whose half-open interior
/// [origin, origin + size) contains its center. Result is indexed like
/// grid.tiles.
std::vector<TileAssignment> assign_annotations(const TileGrid& grid,
                                               const std::vector<Annotation>& annotations);

/// Translates a tile-local detection into the ROI frame. Throws FrameError
/// if the box leaves [0, tile.size]^2.
Detection remap_to_roi(const Detection& local, const TileSpec& tile);

}  // namespace mitodet
