#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mitodet/error.hpp"
#include "mitodet/image.hpp"
#include "mitodet/random.hpp"

namespace mitodet {

class StainError : public Error {
 public:
  using Error::Error;
};

/// Fewer than the minimum number of pixels exceed the tissue OD threshold.
class TooFewTissuePixels : public StainError {
 public:
  explicit TooFewTissuePixels(const std::string& what)
      : StainError(ErrorKind::kStain, what) {}
};

/// The two extreme stain directions are (nearly) collinear.
class DegenerateStains : public StainError {
 public:
  explicit DegenerateStains(const std::string& what)
      : StainError(ErrorKind::kStain, what) {}
};

inline constexpr double kWhiteIntensity = 255.0;

/// Optical densities, one column per pixel, row-major pixel order.
struct OdImage {
  int width = 0;
  int height = 0;
  Eigen::Matrix3Xd od;
};

/// OD = -log10(max(I, 1) / i0) per channel.
OdImage rgb_to_od(const RgbImage& image, double i0 = kWhiteIntensity);

/// I = i0 * 10^-OD, rounded half-up and clamped to [0, 255].
RgbImage od_to_rgb(const OdImage& od, double i0 = kWhiteIntensity);

using StainMatrix = Eigen::Matrix<double, 3, 2>;

struct StainProfile {
  StainMatrix stain_matrix;  // columns: hematoxylin, eosin (unit OD vectors)
  Eigen::Vector2d max_conc;  // 99th percentile concentration per stain
  std::string source_roi;

  /// Throws InvalidArgument when a column is not unit-norm and nonnegative,
  /// the columns are parallel, or a ceiling is not positive.
  void validate() const;
};

struct MacenkoParams {
  double od_threshold = 0.15;   // beta: tissue if any channel OD exceeds it
  double angle_percentile = 1.0;  // alpha
  double conc_percentile = 99.0;
  std::size_t min_tissue_pixels = 100;
  double min_stain_angle_deg = 1.0;
};

StainProfile fit_stain_profile(const RgbImage& image, const MacenkoParams& params = {},
                               std::string source_roi = {});

/// Per-pixel stain concentrations (2 x N) by least squares, negatives
/// clamped to zero.
Eigen::Matrix2Xd stain_concentrations(const OdImage& od, const StainMatrix& stain_matrix);

/// Maps the stain appearance of `image` onto `target`.
RgbImage normalize(const RgbImage& image, const StainProfile& target,
                   const MacenkoParams& params = {});

/// Same as above with the source profile already fitted.
RgbImage normalize(const RgbImage& image, const StainProfile& source,
                   const StainProfile& target);

struct StainBank {
  std::vector<StainProfile> profiles;
  double apply_probability = 0.25;

  void validate() const;
  /// Index of the profile whose source_roi equals `id`, or, failing that,
  /// `id` parsed as a decimal index. Throws InvalidArgument if neither.
  std::size_t find(const std::string& id) const;
};

struct BankBuildResult {
  StainBank bank;
  std::vector<std::string> warnings;
};

/// Fits one profile per ROI from the first `n` images. ROIs whose fit fails
/// are skipped with a warning; fewer than n/2 survivors is an error, as are
/// duplicate ids or fewer than `n` images.
BankBuildResult build_bank(const std::vector<std::pair<std::string, RgbImage>>& images,
                           std::size_t n = 50, double apply_probability = 0.25,
                           const MacenkoParams& params = {});

struct StainApplyResult {
  RgbImage image;
  /// Profile index drawn for this image, if the coin flip selected one.
  std::optional<std::size_t> profile;
  /// True when a profile was drawn but the image had no fittable tissue, so
  /// it was returned unchanged.
  bool skipped = false;
};

/// With probability bank.apply_probability normalizes to a uniformly drawn
/// profile; otherwise returns the input. Deterministic given `rng`.
StainApplyResult stochastic_apply(const RgbImage& image, const StainBank& bank, Rng& rng,
                                  const MacenkoParams& params = {});

/// Linear-interpolation percentile (numpy default) of `values`, p in [0, 100].
double percentile(std::vector<double> values, double p);

std::string bank_to_json(const StainBank& bank);
StainBank bank_from_json(const std::string& text);

}  // namespace mitodet
