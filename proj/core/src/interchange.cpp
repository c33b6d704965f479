#include "mitodet/interchange.hpp"

#include <istream>
#include <ostream>

#include <json.hpp>

#include "mitodet/error.hpp"

namespace mitodet {

namespace {

using json = nlohmann::ordered_json;

template <typename Fn>
auto parse_or_throw(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed " + what + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw InputError("invalid " + what + ": " + e.what());
  }
}

template <typename Record, typename Parse>
std::vector<Record> read_lines(std::istream& is, const char* what, Parse&& parse) {
  std::vector<Record> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse(line));
    } catch (const InputError& e) {
      throw InputError(std::string(what) + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

json roi_json(const RoiSpec& roi) {
  return {{"id", roi.id},
          {"width_px", roi.width_px},
          {"height_px", roi.height_px},
          {"mpp", roi.mpp},
          {"domain", std::string(to_string(roi.domain))},
          {"tumor_type", roi.tumor_type}};
}

RoiSpec roi_from(const nlohmann::json& j) {
  RoiSpec roi;
  roi.id = j.at("id").get<std::string>();
  roi.width_px = j.at("width_px").get<int>();
  roi.height_px = j.at("height_px").get<int>();
  roi.mpp = j.value("mpp", 0.25);
  roi.domain = parse_domain(j.value("domain", std::string("human")));
  roi.tumor_type = j.value("tumor_type", std::string());
  roi.validate();
  return roi;
}

}  // namespace

std::string detection_to_json(const std::string& roi_id, const Detection& det) {
  json j = {{"roi_id", roi_id},
            {"x_min", det.box.x_min()},
            {"y_min", det.box.y_min()},
            {"x_max", det.box.x_max()},
            {"y_max", det.box.y_max()},
            {"score", det.score},
            {"label", std::string(to_string(det.label))}};
  if (det.provenance) {
    j["tile"] = det.provenance->tile_index;
    j["variant"] = std::string(to_string(det.provenance->variant));
  }
  return j.dump();
}

DetectionRecord detection_from_json(const std::string& line) {
  return parse_or_throw("detection record", [&] {
    const auto j = nlohmann::json::parse(line);
    Detection det{PixelBox{j.at("x_min").get<double>(), j.at("y_min").get<double>(),
                           j.at("x_max").get<double>(), j.at("y_max").get<double>()},
                  j.at("score").get<double>(), parse_label(j.at("label").get<std::string>())};
    if (j.contains("tile") || j.contains("variant")) {
      det.provenance = Provenance{j.at("tile").get<std::size_t>(),
                                  parse_tta_variant(j.at("variant").get<std::string>())};
    }
    return DetectionRecord{j.at("roi_id").get<std::string>(), std::move(det)};
  });
}

std::string annotation_to_json(const std::string& roi_id, const Annotation& ann) {
  const json j = {{"roi_id", roi_id},
                  {"x", ann.center.x},
                  {"y", ann.center.y},
                  {"label", std::string(to_string(ann.label))}};
  return j.dump();
}

AnnotationRecord annotation_from_json(const std::string& line) {
  return parse_or_throw("annotation record", [&] {
    const auto j = nlohmann::json::parse(line);
    Annotation ann{{j.at("x").get<double>(), j.at("y").get<double>()},
                   parse_label(j.value("label", std::string("mitotic_figure")))};
    return AnnotationRecord{j.at("roi_id").get<std::string>(), ann};
  });
}

void write_detections(std::ostream& os, const std::string& roi_id,
                      const std::vector<Detection>& dets) {
  for (const auto& d : dets) os << detection_to_json(roi_id, d) << '\n';
}

std::vector<DetectionRecord> read_detections(std::istream& is) {
  return read_lines<DetectionRecord>(is, "detections", detection_from_json);
}

void write_annotations(std::ostream& os, const std::string& roi_id,
                       const std::vector<Annotation>& anns) {
  for (const auto& a : anns) os << annotation_to_json(roi_id, a) << '\n';
}

std::vector<AnnotationRecord> read_annotations(std::istream& is) {
  return read_lines<AnnotationRecord>(is, "annotations", annotation_from_json);
}

std::string grid_to_json(const TileGrid& grid) {
  json tiles = json::array();
  for (const auto& t : grid.tiles) {
    tiles.push_back({{"index", {t.row, t.col}},
                     {"origin", {t.origin_x, t.origin_y}},
                     {"size", t.size},
                     {"clamped", t.clamped},
                     {"padded", t.padded}});
  }
  const json doc = {{"roi", roi_json(grid.roi)},
                    {"tile_size", grid.config.tile_size},
                    {"stride", grid.config.stride},
                    {"rows", grid.rows},
                    {"cols", grid.cols},
                    {"tiles", tiles}};
  return doc.dump(2) + "\n";
}

TileGrid grid_from_json(const std::string& text) {
  return parse_or_throw("tile grid", [&] {
    const auto doc = nlohmann::json::parse(text);
    const RoiSpec roi = roi_from(doc.at("roi"));
    const TileGridConfig cfg{doc.at("tile_size").get<int>(), doc.at("stride").get<int>()};
    TileGrid grid = plan_grid(roi, cfg);
    const auto& tiles = doc.at("tiles");
    bool consistent = tiles.size() == grid.tiles.size() &&
                      doc.at("rows").get<int>() == grid.rows &&
                      doc.at("cols").get<int>() == grid.cols;
    for (std::size_t i = 0; consistent && i < grid.tiles.size(); ++i) {
      const auto origin = tiles[i].at("origin").get<std::vector<int>>();
      consistent = origin.size() == 2 && origin[0] == grid.tiles[i].origin_x &&
                   origin[1] == grid.tiles[i].origin_y;
    }
    if (!consistent) {
      throw InputError("tile grid does not match a fresh plan for its ROI and config");
    }
    return grid;
  });
}

std::string roi_to_json(const RoiSpec& roi) { return roi_json(roi).dump(2) + "\n"; }

RoiSpec roi_from_json(const std::string& text) {
  return parse_or_throw("ROI", [&] { return roi_from(nlohmann::json::parse(text)); });
}

std::vector<RoiSpec> rois_from_json(const std::string& text) {
  return parse_or_throw("ROI list", [&] {
    std::vector<RoiSpec> out;
    for (const auto& j : nlohmann::json::parse(text)) out.push_back(roi_from(j));
    return out;
  });
}

}  // namespace mitodet
