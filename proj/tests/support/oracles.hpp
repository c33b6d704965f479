#pragma once

// Brute-force references for the fusion and evaluation stages. Each is a
// from-scratch restatement of the rule under test and shares no code with
// the library implementation beyond the plain data types.

#include <cstddef>
#include <vector>

#include "mitodet/types.hpp"

namespace mitodet::testing {

struct RawBox {
  double x0, y0, x1, y1;
};

double oracle_iou(const RawBox& a, const RawBox& b);
RawBox raw(const PixelBox& b);

/// Sorts by descending score, then x_min, y_min, x_max, y_max, label.
std::vector<Detection> oracle_rank(std::vector<Detection> dets);

/// O(n^2): a detection survives iff no already-kept, same-label detection
/// overlaps it by more than the threshold.
std::vector<Detection> oracle_nms(const std::vector<Detection>& dets, double thresh);

struct OracleCluster {
  std::vector<Detection> members;
  RawBox fused;
  double score;
};

/// WBF that recomputes every cluster's fused box from its full member list
/// before each comparison. Mean score mode.
std::vector<OracleCluster> oracle_wbf(const std::vector<Detection>& dets, double thresh);

/// Maximum number of prediction/ground-truth pairs within `thresh` under a
/// one-to-one constraint (exhaustive search).
std::size_t oracle_max_matches(const std::vector<Detection>& preds,
                               const std::vector<Annotation>& gts, double thresh);

}  // namespace mitodet::testing
