#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "mitodet/geometry.hpp"

namespace mitodet {

enum class Label { kMitoticFigure, kHardNegative };

enum class Domain { kHuman, kCanine };

/// Test-time augmentation variants. Every variant is an involution.
enum class TtaVariant { kIdentity, kHFlip, kVFlip, kHVFlip };

std::string_view to_string(Label label);
std::string_view to_string(Domain domain);
std::string_view to_string(TtaVariant variant);

/// Parsers accept the lower-case names produced by to_string and throw
/// InvalidArgument on anything else.
Label parse_label(std::string_view text);
Domain parse_domain(std::string_view text);
TtaVariant parse_tta_variant(std::string_view text);

/// Which tile and augmentation a detection came from.
struct Provenance {
  std::size_t tile_index = 0;
  TtaVariant variant = TtaVariant::kIdentity;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Detection {
  /// Throws InvalidArgument if score is outside [0, 1] or not finite.
  Detection(PixelBox box, double score, Label label = Label::kMitoticFigure,
            std::optional<Provenance> provenance = std::nullopt);

  PixelBox box;
  double score;
  Label label;
  std::optional<Provenance> provenance;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct RoiSpec {
  std::string id;
  int width_px = 0;
  int height_px = 0;
  double mpp = 0.25;
  Domain domain = Domain::kHuman;
  std::string tumor_type;

  void validate() const;
};

/// Point-like ground truth in ROI pixel coordinates.
struct Annotation {
  Point center;
  Label label = Label::kMitoticFigure;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

/// Throws InvalidArgument unless the center lies in [0, w) x [0, h).
void validate_annotation(const Annotation& ann, const RoiSpec& roi);

/// Clamps `box` into [0, width_px] x [0, height_px]. Throws FrameError when
/// the box does not overlap the ROI with positive area.
PixelBox clip_to_roi(const PixelBox& box, const RoiSpec& roi);

}  // namespace mitodet
