#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mitodet/tiler.hpp"
#include "mitodet/types.hpp"

namespace mitodet {

// Line-oriented JSON interchange. Detection lines carry
// {roi_id, x_min, y_min, x_max, y_max, score, label}; raw per-tile
// detections additionally carry "tile" and "variant". Annotation lines carry
// {roi_id, x, y, label}.

struct DetectionRecord {
  std::string roi_id;
  Detection detection;
};

struct AnnotationRecord {
  std::string roi_id;
  Annotation annotation;
};

std::string detection_to_json(const std::string& roi_id, const Detection& det);
DetectionRecord detection_from_json(const std::string& line);

std::string annotation_to_json(const std::string& roi_id, const Annotation& ann);
AnnotationRecord annotation_from_json(const std::string& line);

void write_detections(std::ostream& os, const std::string& roi_id,
                      const std::vector<Detection>& dets);
/// Blank lines are skipped; malformed lines throw InputError naming the line.
std::vector<DetectionRecord> read_detections(std::istream& is);

void write_annotations(std::ostream& os, const std::string& roi_id,
                       const std::vector<Annotation>& anns);
std::vector<AnnotationRecord> read_annotations(std::istream& is);

std::string grid_to_json(const TileGrid& grid);
/// Rebuilds the grid from its ROI and config and checks the stored tiles
/// agree with a fresh plan.
TileGrid grid_from_json(const std::string& text);

std::string roi_to_json(const RoiSpec& roi);
RoiSpec roi_from_json(const std::string& text);
/// Accepts a JSON array of ROI objects.
std::vector<RoiSpec> rois_from_json(const std::string& text);

}  // namespace mitodet
