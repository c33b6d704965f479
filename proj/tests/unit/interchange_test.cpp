#include <gtest/gtest.h>

#include <regex>
#include <sstream>

#include "mitodet/error.hpp"
#include "mitodet/interchange.hpp"

namespace mitodet {
namespace {

TEST(DetectionJsonTest, RoundTrip) {
  Detection d{PixelBox{1.5, 2.25, 30.125, 40}, 0.875, Label::kMitoticFigure};
  auto back = detection_from_json(detection_to_json("roi-1", d));
  EXPECT_EQ(back.roi_id, "roi-1");
  EXPECT_EQ(back.detection, d);

  d.provenance = Provenance{4, TtaVariant::kVFlip};
  const auto line = detection_to_json("roi-1", d);
  EXPECT_NE(line.find("\"variant\":\"vflip\""), std::string::npos);
  EXPECT_EQ(detection_from_json(line).detection, d);
}

TEST(DetectionJsonTest, ExactDoubles) {
  const Detection d{PixelBox{0.1, 1.0 / 3.0, 100.7, 200.0 / 7.0}, 0.123456789012345678};
  EXPECT_EQ(detection_from_json(detection_to_json("r", d)).detection, d);
}

TEST(DetectionJsonTest, Rejects) {
  EXPECT_THROW(detection_from_json("not json"), InputError);
  EXPECT_THROW(detection_from_json(R"({"roi_id":"a","x_min":5,"y_min":0,"x_max":1,"y_max":1,"score":0.5,"label":"mitotic_figure"})"),
               InputError);
  EXPECT_THROW(detection_from_json(R"({"roi_id":"a","x_min":0,"y_min":0,"x_max":1,"y_max":1,"score":1.5,"label":"mitotic_figure"})"),
               InputError);
  EXPECT_THROW(detection_from_json(R"({"roi_id":"a","x_min":0,"y_min":0,"x_max":1,"y_max":1,"score":0.5,"label":"cat"})"),
               InputError);
}

TEST(StreamTest, DetectionsSkipBlankLinesAndNameBadLine) {
  std::stringstream ss;
  write_detections(ss, "a", {Detection{PixelBox{0, 0, 1, 1}, 0.5}});
  ss << "\n";
  write_detections(ss, "b", {Detection{PixelBox{0, 0, 2, 2}, 0.6}});
  const auto recs = read_detections(ss);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[1].roi_id, "b");

  std::stringstream bad("{\"roi_id\":\"a\"}\n");
  bad.str(detection_to_json("a", Detection{PixelBox{0, 0, 1, 1}, 0.5}) + "\n{broken\n");
  try {
    read_detections(bad);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(StreamTest, Annotations) {
  std::stringstream ss;
  write_annotations(ss, "a", {{{10.5, 20}}, {{3, 4}, Label::kHardNegative}});
  ss << R"({"roi_id":"b","x":1,"y":2})" << "\n";
  const auto recs = read_annotations(ss);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].annotation.center.x, 10.5);
  EXPECT_EQ(recs[1].annotation.label, Label::kHardNegative);
  EXPECT_EQ(recs[2].annotation.label, Label::kMitoticFigure);
}

TEST(GridJsonTest, RoundTripAndConsistency) {
  const auto grid = plan_grid(RoiSpec{"r", 2000, 1500, 0.25, Domain::kCanine, "lymphoma"}, TileGridConfig{});
  const auto text = grid_to_json(grid);
  const auto back = grid_from_json(text);
  EXPECT_EQ(back.rows, grid.rows);
  EXPECT_EQ(back.cols, grid.cols);
  ASSERT_EQ(back.tiles.size(), grid.tiles.size());
  EXPECT_EQ(back.tiles.back().origin_x, grid.tiles.back().origin_x);
  EXPECT_EQ(back.roi.domain, Domain::kCanine);

  const auto tampered = std::regex_replace(text, std::regex(R"("rows":\s*3)"), R"("rows": 5)");
  ASSERT_NE(tampered, text);
  EXPECT_THROW(grid_from_json(tampered), InputError);
}

TEST(RoiJsonTest, RoundTripAndList) {
  const RoiSpec roi{"x", 100, 50, 0.5, Domain::kCanine, "mast cell tumor"};
  const auto back = roi_from_json(roi_to_json(roi));
  EXPECT_EQ(back.id, "x");
  EXPECT_EQ(back.width_px, 100);
  EXPECT_EQ(back.mpp, 0.5);
  EXPECT_EQ(back.tumor_type, "mast cell tumor");
  const auto list = rois_from_json("[" + roi_to_json(roi) + "," + roi_to_json(RoiSpec{"y", 1, 1}) + "]");
  ASSERT_EQ(list.size(), 2u);
  EXPECT_EQ(list[1].domain, Domain::kHuman);
  EXPECT_THROW(roi_from_json(R"({"id":"z","width_px":0,"height_px":3})"), InputError);
}

}  // namespace
}  // namespace mitodet
