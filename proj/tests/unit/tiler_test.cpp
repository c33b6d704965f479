#include <gtest/gtest.h>

#include <set>

#include "mitodet/error.hpp"
#include "mitodet/random.hpp"
#include "mitodet/tiler.hpp"

namespace mitodet {
namespace {

// Lattice rule restated by enumeration: every multiple of the stride whose
// tile fits, plus a final flush tile when pixels remain.
std::vector<int> enumerate_origins(int extent, int tile, int stride) {
  if (extent <= tile) return {0};
  std::vector<int> out;
  for (int k = 0; k * stride + tile <= extent; ++k) out.push_back(k * stride);
  bool covered = true;
  for (int px = 0; px < extent && covered; ++px) {
    covered = std::any_of(out.begin(), out.end(), [&](int o) { return px >= o && px < o + tile; });
  }
  if (!covered) out.push_back(extent - tile);
  return out;
}

TEST(TileGridConfigTest, Validation) {
  EXPECT_NO_THROW((TileGridConfig{640, 480}.validate()));
  EXPECT_NO_THROW((TileGridConfig{640, 640}.validate()));
  EXPECT_THROW((TileGridConfig{640, 0}.validate()), InvalidArgument);
  EXPECT_THROW((TileGridConfig{640, 641}.validate()), InvalidArgument);
  EXPECT_EQ(TileGridConfig::from_overlap(640, 160), (TileGridConfig{640, 480}));
}

TEST(PlanGridTest, FullSizeRoi) {
  const auto grid = plan_grid({"roi", 6100, 5800}, {640, 480});
  EXPECT_EQ(grid.cols, 13);
  EXPECT_EQ(grid.rows, 12);
  ASSERT_EQ(grid.tiles.size(), 156u);
  EXPECT_EQ(grid.tiles.back().origin_x, 5460);
  EXPECT_EQ(grid.tiles.back().origin_y, 5160);
  EXPECT_TRUE(grid.tiles.back().clamped);
  EXPECT_FALSE(grid.tiles.front().clamped);
  EXPECT_EQ(axis_origins(6100, 640, 480), enumerate_origins(6100, 640, 480));
  EXPECT_EQ(axis_origins(5800, 640, 480), enumerate_origins(5800, 640, 480));
}

TEST(PlanGridTest, ExactAndUndersizedRois) {
  const auto exact = plan_grid({"a", 640, 640}, {640, 480});
  ASSERT_EQ(exact.tiles.size(), 1u);
  EXPECT_FALSE(exact.tiles[0].clamped);
  EXPECT_FALSE(exact.tiles[0].padded);

  const auto narrow = plan_grid({"b", 500, 640}, {640, 480});
  ASSERT_EQ(narrow.tiles.size(), 1u);
  EXPECT_EQ(narrow.tiles[0].origin_x, 0);
  EXPECT_TRUE(narrow.tiles[0].padded);
}

TEST(PlanGridTest, RowMajorAndLatticeOrigins) {
  const auto grid = plan_grid({"a", 2000, 1500}, {640, 480});
  for (std::size_t i = 0; i < grid.tiles.size(); ++i) {
    const auto& t = grid.tiles[i];
    EXPECT_EQ(t.index, i);
    EXPECT_EQ(static_cast<std::size_t>(t.row * grid.cols + t.col), i);
    EXPECT_LE(t.origin_x + t.size, 2000);
    EXPECT_LE(t.origin_y + t.size, 1500);
    if (!t.clamped) {
      EXPECT_EQ(t.origin_x % 480, 0);
      EXPECT_EQ(t.origin_y % 480, 0);
    }
  }
}

TEST(PlanGridTest, AxisOriginsMatchEnumeration) {
  for (int tile = 1; tile <= 12; ++tile) {
    for (int stride = 1; stride <= tile; ++stride) {
      for (int extent = 1; extent <= 60; ++extent) {
        EXPECT_EQ(axis_origins(extent, tile, stride), enumerate_origins(extent, tile, stride))
            << "extent " << extent << " tile " << tile << " stride " << stride;
      }
    }
  }
}

TEST(PlanGridTest, CoverageOnScaledGrids) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int w = 1 + static_cast<int>(rng.uniform_index(200));
    const int h = 1 + static_cast<int>(rng.uniform_index(200));
    const auto grid = plan_grid({"s", w, h}, {8, 6});
    std::vector<int> count(static_cast<std::size_t>(w * h), 0);
    std::vector<bool> near_clamp(count.size(), false);
    for (const auto& t : grid.tiles) {
      for (int y = t.origin_y; y < std::min(t.origin_y + t.size, h); ++y) {
        for (int x = t.origin_x; x < std::min(t.origin_x + t.size, w); ++x) {
          const auto px = static_cast<std::size_t>(y * w + x);
          ++count[px];
          if (t.clamped) near_clamp[px] = true;
        }
      }
    }
    for (std::size_t px = 0; px < count.size(); ++px) {
      EXPECT_GE(count[px], 1);
      if (!near_clamp[px]) {
        EXPECT_LE(count[px], 4);
      }
    }
  }
}

TEST(PlanGridTest, Deterministic) {
  const auto a = plan_grid({"a", 3001, 2999}, {640, 480});
  const auto b = plan_grid({"a", 3001, 2999}, {640, 480});
  EXPECT_EQ(a.tiles, b.tiles);
}

TEST(AssignAnnotationsTest, OverlapOwnership) {
  const auto grid = plan_grid({"a", 2000, 1500}, {640, 480});
  const auto assigned = assign_annotations(grid, {{{500, 100}}});
  std::set<std::pair<int, int>> owners;
  for (const auto& t : grid.tiles) {
    if (!assigned[t.index].background) owners.insert({t.origin_x, t.origin_y});
  }
  EXPECT_EQ(owners, (std::set<std::pair<int, int>>{{0, 0}, {480, 0}}));
  const auto& second = assigned[1].annotations;
  ASSERT_EQ(second.size(), 1u);
  EXPECT_EQ(second[0].center, (Point{20, 100}));
}

TEST(AssignAnnotationsTest, BackgroundAndOriginCorner) {
  const auto grid = plan_grid({"a", 2000, 1500}, {640, 480});
  for (const auto& a : assign_annotations(grid, {})) EXPECT_TRUE(a.background);

  const auto corner = assign_annotations(grid, {{{0, 0}}});
  std::size_t owners = 0;
  for (const auto& a : corner) owners += a.background ? 0 : 1;
  EXPECT_EQ(owners, 1u);
  EXPECT_FALSE(corner[0].background);
}

TEST(AssignAnnotationsTest, HalfOpenBoundary) {
  const auto grid = plan_grid({"a", 1120, 640}, {640, 480});
  ASSERT_EQ(grid.tiles.size(), 2u);
  // x = 640 is outside [0, 640) but inside [480, 1120)
  const auto assigned = assign_annotations(grid, {{{640, 10}}});
  EXPECT_TRUE(assigned[0].background);
  EXPECT_FALSE(assigned[1].background);
}

TEST(AssignAnnotationsTest, RejectsOutsideRoi) {
  const auto grid = plan_grid({"a", 100, 100}, {64, 48});
  EXPECT_THROW(assign_annotations(grid, {{{100, 5}}}), InvalidArgument);
}

TEST(RemapToRoiTest, Examples) {
  TileSpec tile;
  tile.origin_x = 480;
  tile.size = 640;
  const Detection local{{10, 10, 20, 20}, 0.8, Label::kMitoticFigure, Provenance{3, TtaVariant::kVFlip}};
  const Detection roi = remap_to_roi(local, tile);
  EXPECT_EQ(roi.box, PixelBox(490, 10, 500, 20));
  EXPECT_EQ(roi.score, 0.8);
  EXPECT_EQ(roi.provenance, local.provenance);

  TileSpec origin;
  origin.size = 640;
  const Detection full{{0, 0, 640, 640}, 0.5};
  EXPECT_EQ(remap_to_roi(full, origin).box, full.box);

  EXPECT_THROW(remap_to_roi(Detection{{630, 0, 641, 10}, 0.5}, origin), FrameError);
}

TEST(RemapToRoiTest, RoundTripsExactly) {
  Rng rng(19);
  for (int i = 0; i < 5000; ++i) {
    TileSpec tile;
    tile.size = 640;
    tile.origin_x = static_cast<int>(rng.uniform_index(6000));
    tile.origin_y = static_cast<int>(rng.uniform_index(6000));
    // Single-precision coordinates, as detectors emit them.
    auto coord = [&] { return static_cast<double>(static_cast<float>(rng.uniform01() * 600)); };
    const double x = coord(), y = coord();
    const PixelBox b{x, y, x + 1 + static_cast<float>(rng.uniform01() * 39), y + 1 + static_cast<float>(rng.uniform01() * 39)};
    const auto back = remap_to_roi(Detection{b, 0.5}, tile).box.translated(-tile.origin_x, -tile.origin_y);
    EXPECT_EQ(back, b);
  }
}

}  // namespace
}  // namespace mitodet
