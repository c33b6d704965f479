#include "mitodet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "mitodet/error.hpp"

namespace mitodet {

void MatchConfig::validate() const {
  if (!(dist_thresh_um > 0.0) || !std::isfinite(dist_thresh_um)) {
    throw InvalidArgument("dist_thresh_um must be positive");
  }
}

double MatchConfig::threshold_px(double mpp) const {
  validate();
  if (!(mpp > 0.0)) throw InvalidArgument("mpp must be positive");
  return dist_thresh_um / mpp;
}

namespace {

std::vector<std::size_t> score_order(const std::vector<Detection>& preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].score > preds[b].score;
  });
  return order;
}

std::vector<Detection> mitotic_only(const std::vector<Detection>& dets) {
  std::vector<Detection> out;
  for (const auto& d : dets) {
    if (d.label == Label::kMitoticFigure) out.push_back(d);
  }
  return out;
}

std::vector<Annotation> mitotic_only(const std::vector<Annotation>& anns) {
  std::vector<Annotation> out;
  for (const auto& a : anns) {
    if (a.label == Label::kMitoticFigure) out.push_back(a);
  }
  return out;
}

}  // namespace

MatchResult match(const std::vector<Detection>& preds, const std::vector<Annotation>& gts,
                  double threshold_px) {
  MatchResult result;
  result.is_tp.assign(preds.size(), false);
  std::vector<bool> taken(gts.size(), false);
  for (const std::size_t p : score_order(preds)) {
    std::size_t best = gts.size();
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double d = center_distance(preds[p].box, gts[g].center);
      if (d <= threshold_px && d < best_dist) {
        best = g;
        best_dist = d;
      }
    }
    if (best < gts.size()) {
      taken[best] = true;
      result.is_tp[p] = true;
      result.pairs.emplace_back(p, best);
    }
  }
  result.tp = result.pairs.size();
  result.fp = preds.size() - result.tp;
  result.fn = gts.size() - result.tp;
  return result;
}

Prf prf(std::size_t tp, std::size_t fp, std::size_t fn) {
  if (tp == 0 && fp == 0 && fn == 0) return {1.0, 1.0, 1.0};
  const double t = static_cast<double>(tp);
  const double precision = tp + fp > 0 ? t / static_cast<double>(tp + fp) : 0.0;
  const double recall = tp + fn > 0 ? t / static_cast<double>(tp + fn) : 0.0;
  return {precision, recall, f1_from_rates(precision, recall)};
}

double f1_from_rates(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

std::optional<double> average_precision(const std::vector<ImageEval>& images) {
  struct Scored {
    double score;
    bool tp;
  };
  std::vector<Scored> scored;
  std::size_t total_gt = 0;
  for (const auto& img : images) {
    const auto preds = mitotic_only(img.preds);
    const auto gts = mitotic_only(img.gts);
    total_gt += gts.size();
    // Greedy matching visits predictions by score, so matching everything
    // once yields the same TP/FP label each prediction gets at any cutoff
    // that includes it.
    const auto m = match(preds, gts, img.threshold_px);
    for (std::size_t i = 0; i < preds.size(); ++i) scored.push_back({preds[i].score, m.is_tp[i]});
  }
  if (total_gt == 0) return std::nullopt;

  std::sort(scored.begin(), scored.end(),
            [](const Scored& a, const Scored& b) { return a.score > b.score; });

  std::vector<double> recall;
  std::vector<double> precision;
  std::size_t tp = 0;
  std::size_t seen = 0;
  for (std::size_t i = 0; i < scored.size();) {
    const double s = scored[i].score;
    for (; i < scored.size() && scored[i].score == s; ++i) {
      ++seen;
      if (scored[i].tp) ++tp;
    }
    recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(seen));
  }
  for (std::size_t k = precision.size(); k-- > 1;) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < recall.size(); ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

ImageReport evaluate_image(const ImageEval& image) {
  const auto preds = mitotic_only(image.preds);
  const auto gts = mitotic_only(image.gts);
  const auto m = match(preds, gts, image.threshold_px);
  const Prf rates = prf(m.tp, m.fp, m.fn);
  ImageReport r;
  r.roi_id = image.roi_id;
  r.tp = m.tp;
  r.fp = m.fp;
  r.fn = m.fn;
  r.precision = rates.precision;
  r.recall = rates.recall;
  r.f1 = rates.f1;
  r.ap = average_precision({image});
  return r;
}

EvalReport aggregate(std::vector<ImageReport> per_image, std::optional<double> pooled_ap) {
  if (per_image.empty()) throw InvalidArgument("aggregate needs at least one image");
  EvalReport report;
  std::size_t tp = 0, fp = 0, fn = 0;
  double f1_sum = 0.0;
  double ap_sum = 0.0;
  std::size_t ap_count = 0;
  for (const auto& r : per_image) {
    tp += r.tp;
    fp += r.fp;
    fn += r.fn;
    f1_sum += r.f1;
    if (r.ap) {
      ap_sum += *r.ap;
      ++ap_count;
    }
  }
  report.mean_f1 = f1_sum / static_cast<double>(per_image.size());
  if (ap_count > 0) report.mean_ap = ap_sum / static_cast<double>(ap_count);
  const Prf pooled = prf(tp, fp, fn);
  report.pooled_precision = pooled.precision;
  report.pooled_recall = pooled.recall;
  report.pooled_f1 = pooled.f1;
  report.pooled_ap = pooled_ap;
  report.images = std::move(per_image);
  return report;
}

EvalReport evaluate(const std::vector<ImageEval>& images) {
  std::vector<ImageReport> per_image;
  per_image.reserve(images.size());
  for (const auto& img : images) per_image.push_back(evaluate_image(img));
  return aggregate(std::move(per_image), average_precision(images));
}

std::string report_to_json(const EvalReport& report) {
  using json = nlohmann::ordered_json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json images = json::array();
  for (const auto& r : report.images) {
    images.push_back({{"roi_id", r.roi_id},
                      {"tp", r.tp},
                      {"fp", r.fp},
                      {"fn", r.fn},
                      {"precision", r.precision},
                      {"recall", r.recall},
                      {"f1", r.f1},
                      {"ap", opt(r.ap)}});
  }
  const json doc = {{"images", images},
                    {"mean_f1", report.mean_f1},
                    {"mean_ap", opt(report.mean_ap)},
                    {"pooled_precision", report.pooled_precision},
                    {"pooled_recall", report.pooled_recall},
                    {"pooled_f1", report.pooled_f1},
                    {"pooled_ap", opt(report.pooled_ap)}};
  return doc.dump(2) + "\n";
}

}  // namespace mitodet
