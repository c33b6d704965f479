#include "mitodet/stain.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

namespace mitodet {

namespace {

using json = nlohmann::json;

double sorted_percentile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw InvalidArgument("percentile of an empty sample");
  const double rank = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double degrees_between(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double c = std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

// Flips a direction into the positive octant where possible, drops negative
// components and rescales to unit length.
Eigen::Vector3d positive_unit(Eigen::Vector3d v) {
  if (v.sum() < 0.0) v = -v;
  v = v.cwiseMax(0.0);
  const double n = v.norm();
  if (!(n > 0.0)) throw DegenerateStains("stain direction has no positive component");
  return v / n;
}

}  // namespace

double percentile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return sorted_percentile(values, p);
}

OdImage rgb_to_od(const RgbImage& image, double i0) {
  OdImage out{image.width(), image.height(), Eigen::Matrix3Xd(3, image.pixel_count())};
  // 256-entry lookup: identical results to evaluating the formula per pixel.
  std::array<double, 256> table{};
  for (int v = 0; v < 256; ++v) {
    table[static_cast<std::size_t>(v)] = -std::log10(std::max(v, 1) / i0);
  }
  const auto data = image.data();
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    out.od(0, static_cast<Eigen::Index>(i)) = table[data[3 * i]];
    out.od(1, static_cast<Eigen::Index>(i)) = table[data[3 * i + 1]];
    out.od(2, static_cast<Eigen::Index>(i)) = table[data[3 * i + 2]];
  }
  return out;
}

RgbImage od_to_rgb(const OdImage& od, double i0) {
  RgbImage out(od.width, od.height, 0);
  auto data = out.data();
  if (static_cast<std::size_t>(od.od.cols()) != out.pixel_count()) {
    throw InvalidArgument("OD image size does not match its dimensions");
  }
  for (Eigen::Index i = 0; i < od.od.cols(); ++i) {
    for (Eigen::Index c = 0; c < 3; ++c) {
      const double v = std::floor(i0 * std::pow(10.0, -od.od(c, i)) + 0.5);
      data[static_cast<std::size_t>(3 * i + c)] =
          static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  }
  return out;
}

void StainProfile::validate() const {
  for (int c = 0; c < 2; ++c) {
    const Eigen::Vector3d col = stain_matrix.col(c);
    if (!col.allFinite() || (col.array() < 0.0).any() || std::abs(col.norm() - 1.0) > 1e-6) {
      throw InvalidArgument("stain profile '" + source_roi +
                            "': columns must be nonnegative unit vectors");
    }
  }
  if (degrees_between(stain_matrix.col(0), stain_matrix.col(1)) < 1e-3) {
    throw InvalidArgument("stain profile '" + source_roi + "': columns are parallel");
  }
  if (!max_conc.allFinite() || (max_conc.array() <= 0.0).any()) {
    throw InvalidArgument("stain profile '" + source_roi +
                          "': concentration ceilings must be positive");
  }
}

Eigen::Matrix2Xd stain_concentrations(const OdImage& od, const StainMatrix& stain_matrix) {
  const Eigen::Matrix2d gram = stain_matrix.transpose() * stain_matrix;
  const Eigen::Matrix<double, 2, 3> pinv = gram.inverse() * stain_matrix.transpose();
  Eigen::Matrix2Xd conc = pinv * od.od;
  return conc.cwiseMax(0.0);
}

StainProfile fit_stain_profile(const RgbImage& image, const MacenkoParams& params,
                               std::string source_roi) {
  const OdImage od = rgb_to_od(image);

  std::vector<Eigen::Index> tissue;
  tissue.reserve(static_cast<std::size_t>(od.od.cols()));
  for (Eigen::Index i = 0; i < od.od.cols(); ++i) {
    if ((od.od.col(i).array() > params.od_threshold).any()) tissue.push_back(i);
  }
  if (tissue.size() < params.min_tissue_pixels) {
    std::ostringstream os;
    os << "only " << tissue.size() << " pixels exceed OD " << params.od_threshold
       << " (need " << params.min_tissue_pixels << ")";
    throw TooFewTissuePixels(os.str());
  }

  const auto n = static_cast<Eigen::Index>(tissue.size());
  OdImage tissue_od{static_cast<int>(n), 1, Eigen::Matrix3Xd(3, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    tissue_od.od.col(k) = od.od.col(tissue[static_cast<std::size_t>(k)]);
  }

  const Eigen::Vector3d mean = tissue_od.od.rowwise().mean();
  const Eigen::Matrix3Xd centered = tissue_od.od.colwise() - mean;
  const Eigen::Matrix3d cov = centered * centered.transpose() / static_cast<double>(n - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);

  // Eigenvalues ascend: the principal plane is spanned by columns 2 and 1.
  Eigen::Matrix<double, 3, 2> plane;
  plane.col(0) = solver.eigenvectors().col(2);
  plane.col(1) = solver.eigenvectors().col(1);
  if (plane(0, 0) < 0.0) plane.col(0) *= -1.0;
  if (plane(0, 1) < 0.0) plane.col(1) *= -1.0;

  const Eigen::Matrix2Xd projected = plane.transpose() * tissue_od.od;
  std::vector<double> angles(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    angles[static_cast<std::size_t>(k)] = std::atan2(projected(1, k), projected(0, k));
  }
  std::sort(angles.begin(), angles.end());
  const double min_phi = sorted_percentile(angles, params.angle_percentile);
  const double max_phi = sorted_percentile(angles, 100.0 - params.angle_percentile);

  const double spread_deg = (max_phi - min_phi) * 180.0 / std::numbers::pi;
  if (spread_deg < params.min_stain_angle_deg) {
    std::ostringstream os;
    os << "extreme stain directions are " << spread_deg << " degrees apart";
    throw DegenerateStains(os.str());
  }

  const Eigen::Vector3d v_min = positive_unit(plane * Eigen::Vector2d(std::cos(min_phi), std::sin(min_phi)));
  const Eigen::Vector3d v_max = positive_unit(plane * Eigen::Vector2d(std::cos(max_phi), std::sin(max_phi)));

  // Larger angle is hematoxylin; hematoxylin must carry the larger blue OD.
  Eigen::Vector3d h = v_max;
  Eigen::Vector3d e = v_min;
  if (h(2) < e(2)) std::swap(h, e);

  if (degrees_between(h, e) < params.min_stain_angle_deg) {
    throw DegenerateStains("stain directions collapse after clamping to the positive octant");
  }

  StainProfile profile;
  profile.stain_matrix.col(0) = h;
  profile.stain_matrix.col(1) = e;
  profile.source_roi = std::move(source_roi);

  const Eigen::Matrix2Xd conc = stain_concentrations(tissue_od, profile.stain_matrix);
  for (int s = 0; s < 2; ++s) {
    std::vector<double> channel(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) channel[static_cast<std::size_t>(k)] = conc(s, k);
    profile.max_conc(s) = percentile(std::move(channel), params.conc_percentile);
  }
  if ((profile.max_conc.array() <= 0.0).any()) {
    throw DegenerateStains("a stain has zero concentration at the ceiling percentile");
  }
  profile.validate();
  return profile;
}

RgbImage normalize(const RgbImage& image, const StainProfile& source,
                   const StainProfile& target) {
  OdImage od = rgb_to_od(image);
  Eigen::Matrix2Xd conc = stain_concentrations(od, source.stain_matrix);
  const Eigen::Vector2d scale = target.max_conc.cwiseQuotient(source.max_conc);
  conc = scale.asDiagonal() * conc;
  od.od = target.stain_matrix * conc;
  return od_to_rgb(od);
}

RgbImage normalize(const RgbImage& image, const StainProfile& target,
                   const MacenkoParams& params) {
  return normalize(image, fit_stain_profile(image, params), target);
}

void StainBank::validate() const {
  if (!(apply_probability >= 0.0 && apply_probability <= 1.0)) {
    throw InvalidArgument("apply_probability must lie in [0, 1]");
  }
  if (apply_probability > 0.0 && profiles.empty()) {
    throw InvalidArgument("a stain bank with apply_probability > 0 needs profiles");
  }
  for (const auto& p : profiles) p.validate();
}

std::size_t StainBank::find(const std::string& id) const {
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    if (profiles[i].source_roi == id) return i;
  }
  std::size_t pos = 0;
  try {
    const unsigned long idx = std::stoul(id, &pos);
    if (pos == id.size() && idx < profiles.size()) return idx;
  } catch (const std::exception&) {
  }
  throw InvalidArgument("no stain profile with id '" + id + "'");
}

BankBuildResult build_bank(const std::vector<std::pair<std::string, RgbImage>>& images,
                           std::size_t n, double apply_probability,
                           const MacenkoParams& params) {
  if (n == 0) throw InvalidArgument("bank size must be positive");
  if (images.size() < n) {
    throw InvalidArgument("need images from " + std::to_string(n) + " ROIs, got " +
                          std::to_string(images.size()));
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen.insert(images[i].first).second) {
      throw InvalidArgument("duplicate ROI id '" + images[i].first + "'");
    }
  }

  BankBuildResult result;
  result.bank.apply_probability = apply_probability;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& [roi_id, image] = images[i];
    try {
      result.bank.profiles.push_back(fit_stain_profile(image, params, roi_id));
    } catch (const StainError& e) {
      result.warnings.push_back("skipping ROI '" + roi_id + "': " + e.what());
    }
  }
  if (2 * result.bank.profiles.size() < n) {
    throw StainError(ErrorKind::kStain,
                     "only " + std::to_string(result.bank.profiles.size()) + " of " +
                         std::to_string(n) + " ROIs produced a stain profile");
  }
  result.bank.validate();
  return result;
}

StainApplyResult stochastic_apply(const RgbImage& image, const StainBank& bank, Rng& rng,
                                  const MacenkoParams& params) {
  StainApplyResult result{image, std::nullopt, false};
  if (bank.profiles.empty() || !(rng.uniform01() < bank.apply_probability)) return result;
  const std::size_t pick = rng.uniform_index(bank.profiles.size());
  result.profile = pick;
  try {
    result.image = normalize(image, bank.profiles[pick], params);
  } catch (const StainError&) {
    result.skipped = true;
  }
  return result;
}

std::string bank_to_json(const StainBank& bank) {
  json profiles = json::array();
  for (const auto& p : bank.profiles) {
    // Third column completes the basis (unit residual direction), so the
    // matrix is stored as a full 3x3.
    const Eigen::Vector3d h = p.stain_matrix.col(0);
    const Eigen::Vector3d e = p.stain_matrix.col(1);
    const Eigen::Vector3d r = h.cross(e).normalized();
    json m = json::array();
    for (int row = 0; row < 3; ++row) {
      m.push_back(h(row));
      m.push_back(e(row));
      m.push_back(r(row));
    }
    profiles.push_back({{"source_roi", p.source_roi},
                        {"stain_matrix", m},
                        {"max_conc", {p.max_conc(0), p.max_conc(1)}}});
  }
  const json doc = {{"profiles", profiles}, {"apply_probability", bank.apply_probability}};
  return doc.dump(2) + "\n";
}

StainBank bank_from_json(const std::string& text) {
  StainBank bank;
  try {
    const json doc = json::parse(text);
    bank.apply_probability = doc.at("apply_probability").get<double>();
    for (const auto& p : doc.at("profiles")) {
      const auto m = p.at("stain_matrix").get<std::vector<double>>();
      const auto mc = p.at("max_conc").get<std::vector<double>>();
      if (m.size() != 9 || mc.size() != 2) {
        throw InputError("stain_matrix needs 9 numbers and max_conc 2");
      }
      StainProfile profile;
      for (int row = 0; row < 3; ++row) {
        profile.stain_matrix(row, 0) = m[static_cast<std::size_t>(3 * row)];
        profile.stain_matrix(row, 1) = m[static_cast<std::size_t>(3 * row + 1)];
      }
      profile.max_conc = {mc[0], mc[1]};
      profile.source_roi = p.at("source_roi").get<std::string>();
      bank.profiles.push_back(std::move(profile));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed stain bank: ") + e.what());
  }
  bank.validate();
  return bank;
}

}  // namespace mitodet
