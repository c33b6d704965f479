#include "mitodet/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mitodet/error.hpp"

namespace mitodet {

std::string_view to_string(Label label) {
  switch (label) {
    case Label::kMitoticFigure: return "mitotic_figure";
    case Label::kHardNegative: return "hard_negative";
  }
  return "unknown";
}

std::string_view to_string(Domain domain) {
  switch (domain) {
    case Domain::kHuman: return "human";
    case Domain::kCanine: return "canine";
  }
  return "unknown";
}

std::string_view to_string(TtaVariant variant) {
  switch (variant) {
    case TtaVariant::kIdentity: return "identity";
    case TtaVariant::kHFlip: return "hflip";
    case TtaVariant::kVFlip: return "vflip";
    case TtaVariant::kHVFlip: return "hvflip";
  }
  return "unknown";
}

Label parse_label(std::string_view text) {
  if (text == "mitotic_figure") return Label::kMitoticFigure;
  if (text == "hard_negative") return Label::kHardNegative;
  throw InvalidArgument("unknown label '" + std::string(text) + "'");
}

Domain parse_domain(std::string_view text) {
  if (text == "human") return Domain::kHuman;
  if (text == "canine") return Domain::kCanine;
  throw InvalidArgument("unknown domain '" + std::string(text) + "'");
}

TtaVariant parse_tta_variant(std::string_view text) {
  if (text == "identity") return TtaVariant::kIdentity;
  if (text == "hflip") return TtaVariant::kHFlip;
  if (text == "vflip") return TtaVariant::kVFlip;
  if (text == "hvflip") return TtaVariant::kHVFlip;
  throw InvalidArgument("unknown TTA variant '" + std::string(text) + "'");
}

Detection::Detection(PixelBox box_, double score_, Label label_,
                     std::optional<Provenance> provenance_)
    : box(box_), score(score_), label(label_), provenance(provenance_) {
  if (!std::isfinite(score) || score < 0.0 || score > 1.0) {
    std::ostringstream os;
    os << "detection score " << score << " outside [0, 1]";
    throw InvalidArgument(os.str());
  }
}

void RoiSpec::validate() const {
  if (width_px < 1 || height_px < 1) {
    throw InvalidArgument("ROI '" + id + "' must have positive width and height");
  }
  if (!(mpp > 0.0) || !std::isfinite(mpp)) {
    throw InvalidArgument("ROI '" + id + "' must have a positive mpp");
  }
}

void validate_annotation(const Annotation& ann, const RoiSpec& roi) {
  const auto [x, y] = ann.center;
  if (!(x >= 0.0 && x < roi.width_px && y >= 0.0 && y < roi.height_px)) {
    std::ostringstream os;
    os << "annotation (" << x << ", " << y << ") outside ROI '" << roi.id << "' ("
       << roi.width_px << "x" << roi.height_px << ")";
    throw InvalidArgument(os.str());
  }
}

PixelBox clip_to_roi(const PixelBox& box, const RoiSpec& roi) {
  const double w = roi.width_px;
  const double h = roi.height_px;
  const double x0 = std::clamp(box.x_min(), 0.0, w);
  const double y0 = std::clamp(box.y_min(), 0.0, h);
  const double x1 = std::clamp(box.x_max(), 0.0, w);
  const double y1 = std::clamp(box.y_max(), 0.0, h);
  if (!(x0 < x1 && y0 < y1)) {
    throw FrameError("box " + to_string(box) + " lies fully outside ROI '" + roi.id + "'");
  }
  return {x0, y0, x1, y1};
}

}  // namespace mitodet
