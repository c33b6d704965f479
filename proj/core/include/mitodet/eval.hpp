#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mitodet/types.hpp"

namespace mitodet {

struct MatchConfig {
  double dist_thresh_um = 7.5;

  void validate() const;
  /// Threshold in pixels at the given resolution (30 px at 0.25 um/px).
  double threshold_px(double mpp) const;
};

struct MatchResult {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  /// (prediction index, ground-truth index) into the inputs as given.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  /// Per prediction: whether it was matched.
  std::vector<bool> is_tp;
};

/// Greedy one-to-one matching. Predictions are visited by descending score
/// (ties keep input order); each takes the nearest unmatched ground truth
/// whose center distance is <= threshold_px, ties going to the lower
/// ground-truth index.
MatchResult match(const std::vector<Detection>& preds, const std::vector<Annotation>& gts,
                  double threshold_px);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// 0/0 rates are 0, except tp = fp = fn = 0 which scores (1, 1, 1).
Prf prf(std::size_t tp, std::size_t fp, std::size_t fn);

/// Harmonic mean of precision and recall; 0 when both are 0.
double f1_from_rates(double precision, double recall);

/// One image's predictions and ground truth for AP computation.
struct ImageEval {
  std::string roi_id;
  std::vector<Detection> preds;
  std::vector<Annotation> gts;
  double threshold_px = 30.0;
};

/// All-point interpolated AP over the pooled precision-recall curve swept at
/// each unique score. Matching is per image as in match(). Returns nullopt
/// when there is no ground truth at all.
std::optional<double> average_precision(const std::vector<ImageEval>& images);

struct ImageReport {
  std::string roi_id;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> ap;
};

struct EvalReport {
  std::vector<ImageReport> images;
  double mean_f1 = 0.0;
  std::optional<double> mean_ap;  // over images with ground truth
  double pooled_precision = 0.0;
  double pooled_recall = 0.0;
  double pooled_f1 = 0.0;
  std::optional<double> pooled_ap;
};

/// Matches one image; hard-negative predictions and annotations are ignored.
ImageReport evaluate_image(const ImageEval& image);

/// mean_f1 is the unweighted mean of per-image F1; pooled metrics come from
/// summed counts. Requires at least one image.
EvalReport aggregate(std::vector<ImageReport> per_image,
                     std::optional<double> pooled_ap = std::nullopt);

/// Evaluates every image and aggregates, including pooled AP.
EvalReport evaluate(const std::vector<ImageEval>& images);

std::string report_to_json(const EvalReport& report);

}  // namespace mitodet
