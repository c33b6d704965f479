#include <gtest/gtest.h>

#include <map>
#include <set>

#include "mitodet/error.hpp"
#include "mitodet/manifest.hpp"

namespace mitodet {
namespace {

// A 1 x n strip of 8 px tiles with annotations in the listed tiles.
RoiTiles strip(const std::string& id, int n, const std::vector<int>& annotated,
               Domain domain = Domain::kHuman) {
  RoiTiles out{plan_grid(RoiSpec{id, 8 * n, 8, 0.25, domain, ""}, TileGridConfig{8, 8}), {}};
  for (int k : annotated) out.annotations.push_back({{8.0 * k + 4.0, 4.0}});
  return out;
}

std::vector<TileRecord> records(const std::string& prefix, std::size_t n, Domain domain) {
  std::vector<TileRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({prefix + std::to_string(i), prefix, 0, 0, false, domain, 1});
  }
  return out;
}

TEST(ManifestConfigTest, HumansPerBatchRoundsHalfUp) {
  EXPECT_EQ((ManifestConfig{0, 64, 0.5, 0}.humans_per_batch()), 32u);
  EXPECT_EQ((ManifestConfig{0, 5, 0.5, 0}.humans_per_batch()), 3u);
  EXPECT_EQ((ManifestConfig{0, 4, 1.0, 0}.humans_per_batch()), 4u);
  EXPECT_THROW((ManifestConfig{0, 4, 1.5, 0}.validate()), InvalidArgument);
  EXPECT_THROW((ManifestConfig{0, 1, 0.5, 0}.validate()), InvalidArgument);
}

TEST(BuildManifestTest, KeepsAnnotatedAndSamplesBackground) {
  const auto m = build_manifest({strip("a", 10, {0, 3, 5, 9})}, ManifestConfig{3, 64, 0.5, 7});
  ASSERT_EQ(m.records.size(), 7u);
  EXPECT_EQ(m.background_available, 6u);
  EXPECT_TRUE(m.warnings.empty());
  std::size_t annotated = 0;
  for (const auto& r : m.records) {
    annotated += r.background ? 0 : 1;
    EXPECT_EQ(r.background, r.annotation_count == 0);
  }
  EXPECT_EQ(annotated, 4u);
  EXPECT_EQ(m.records[0].tile_id, "a/r0_c0");
  EXPECT_EQ(m.records[1].tile_id, "a/r0_c3");
  EXPECT_EQ(m.human_tiles, 7u);
}

TEST(BuildManifestTest, ClampsOversizedSupplementWithWarning) {
  const auto m = build_manifest({strip("a", 10, {0, 3, 5, 9})}, ManifestConfig{10, 64, 0.5, 7});
  EXPECT_EQ(m.records.size(), 10u);
  ASSERT_EQ(m.warnings.size(), 1u);
}

TEST(BuildManifestTest, SeededAndGlobal) {
  const std::vector<RoiTiles> rois{strip("a", 50, {1}), strip("b", 50, {2}, Domain::kCanine)};
  const ManifestConfig cfg{20, 64, 0.5, 3};
  const auto m1 = build_manifest(rois, cfg);
  const auto m2 = build_manifest(rois, cfg);
  EXPECT_EQ(m1.records, m2.records);
  auto other = cfg;
  other.seed = 4;
  EXPECT_NE(build_manifest(rois, other).records, m1.records);
  std::set<std::string> ids;
  for (const auto& r : m1.records) EXPECT_TRUE(ids.insert(r.tile_id).second);
  EXPECT_EQ(m1.human_tiles + m1.canine_tiles, 22u);
  EXPECT_THROW(build_manifest({strip("a", 3, {}), strip("a", 3, {})}, cfg), InvalidArgument);
}

TEST(BuildManifestTest, HardNegativesStillCountAsAnnotated) {
  auto roi = strip("a", 3, {});
  roi.annotations.push_back({{12, 4}, Label::kHardNegative});
  const auto m = build_manifest({roi}, ManifestConfig{0, 64, 0.5, 0});
  ASSERT_EQ(m.records.size(), 1u);
  EXPECT_EQ(m.records[0].tile_id, "a/r0_c1");
}

TEST(BalancedBatchesTest, EvenSplit) {
  auto manifest = records("h", 100, Domain::kHuman);
  const auto canine = records("c", 300, Domain::kCanine);
  manifest.insert(manifest.end(), canine.begin(), canine.end());
  const ManifestConfig cfg{0, 64, 0.5, 11};
  const auto batches = balanced_batches(manifest, cfg);
  EXPECT_EQ(batches.size(), 10u);  // ceil(300 / 32)
  for (const auto& b : batches) {
    ASSERT_EQ(b.size(), 64u);
    std::size_t humans = 0;
    for (const auto& id : b) humans += id[0] == 'h';
    EXPECT_EQ(humans, 32u);
    EXPECT_EQ(std::set<std::string>(b.begin(), b.end()).size(), 64u);
  }
  EXPECT_EQ(balanced_batches(manifest, cfg), batches);
}

TEST(BalancedBatchesTest, HumanOnly) {
  const auto manifest = records("h", 10, Domain::kHuman);
  const auto batches = balanced_batches(manifest, ManifestConfig{0, 4, 1.0, 0}, 5);
  for (const auto& b : batches) {
    ASSERT_EQ(b.size(), 4u);
    for (const auto& id : b) EXPECT_EQ(id[0], 'h');
  }
  EXPECT_THROW(balanced_batches(manifest, ManifestConfig{0, 4, 0.5, 0}), InvalidArgument);
}

TEST(BalancedBatchesTest, SmallDomainRecyclesWithoutRepeatsWithinAPass) {
  auto manifest = records("h", 10, Domain::kHuman);
  const auto canine = records("c", 1000, Domain::kCanine);
  manifest.insert(manifest.end(), canine.begin(), canine.end());
  const auto batches = balanced_batches(manifest, ManifestConfig{0, 4, 0.5, 5});
  EXPECT_EQ(batches.size(), 500u);
  std::map<std::string, int> human_uses;
  std::set<std::string> canine_seen;
  std::vector<std::string> human_stream;
  for (const auto& b : batches) {
    EXPECT_NE(b[0], b[1]);
    human_stream.push_back(b[0]);
    human_stream.push_back(b[1]);
    for (const auto& id : b) {
      if (id[0] == 'h') {
        ++human_uses[id];
      } else {
        EXPECT_TRUE(canine_seen.insert(id).second) << id;
      }
    }
  }
  EXPECT_EQ(canine_seen.size(), 1000u);
  // Every consecutive pass of 10 human draws covers all 10 tiles.
  for (std::size_t start = 0; start + 10 <= human_stream.size(); start += 10) {
    EXPECT_EQ(std::set<std::string>(human_stream.begin() + start, human_stream.begin() + start + 10).size(), 10u);
  }
  for (const auto& [id, uses] : human_uses) EXPECT_EQ(uses, 100);
}

TEST(BalancedBatchesTest, NoRepeatAcrossPassBoundary) {
  // 3 tiles, 2 per batch: the second batch straddles the pass boundary.
  const auto manifest = records("h", 3, Domain::kHuman);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    for (const auto& b : balanced_batches(manifest, ManifestConfig{0, 2, 1.0, seed}, 20)) {
      EXPECT_NE(b[0], b[1]);
    }
  }
}

TEST(TileRecordJsonTest, RoundTripAndInvariant) {
  const TileRecord r{"a/r1_c2", "a", 480, 960, false, Domain::kCanine, 3};
  EXPECT_EQ(tile_record_from_json(tile_record_to_json(r)), r);
  EXPECT_THROW(tile_record_from_json(
                   R"({"tile_id":"x","roi_id":"a","origin":[0,0],"background":true,"domain":"human","annotation_count":2})"),
               InputError);
  EXPECT_THROW(tile_record_from_json("{"), InputError);
}

}  // namespace
}  // namespace mitodet
