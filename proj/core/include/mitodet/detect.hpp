#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mitodet/image.hpp"
#include "mitodet/types.hpp"

namespace mitodet {

/// Identifies the tile a backend is looking at. Neural backends only use the
/// pixels; the mock uses the key to look up its planted ground truth.
struct TileKey {
  std::size_t tile_index = 0;
  TtaVariant variant = TtaVariant::kIdentity;
};

/// Contract for tile-level detectors: tile pixels in, tile-local detections
/// out. Boxes must lie in [0, tile_size]^2 and scores in [0, 1], and output
/// must be a pure function of (backend state, input).
class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;

  virtual std::vector<Detection> detect(const RgbImage& tile, const TileKey& key) const = 0;

  virtual int tile_size() const = 0;
  virtual std::string name() const = 0;

  /// Backends that return false are called from one thread at a time.
  virtual bool thread_safe() const { return true; }
};

struct MockBackendConfig {
  /// Tile-local annotations per tile index. Mitotic figures become
  /// mitotic_figure detections, hard negatives hard_negative ones.
  std::map<std::size_t, std::vector<Annotation>> ground_truth;
  int tile_size = 640;
  double box_size = 50.0;
  double score_mean = 0.9;
  double score_jitter = 0.0;
  double position_jitter = 0.0;
  /// Poisson mean of spurious detections per (tile, variant) call.
  double false_positive_rate = 0.0;
  double fp_score_mean = 0.3;
  double fp_score_jitter = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Deterministic stand-in detector that reports planted ground truth with
/// seeded jitter and Poisson false positives. Detections are emitted in the
/// frame of the requested TTA variant, so inverting them recovers the truth.
class MockBackend final : public DetectorBackend {
 public:
  explicit MockBackend(MockBackendConfig config);

  std::vector<Detection> detect(const RgbImage& tile, const TileKey& key) const override;
  int tile_size() const override { return config_.tile_size; }
  std::string name() const override { return "mock"; }

  const MockBackendConfig& config() const noexcept { return config_; }

 private:
  MockBackendConfig config_;
};

/// Keeps mitotic_figure detections with score >= threshold; hard negatives
/// are always dropped.
std::vector<Detection> filter_by_confidence(const std::vector<Detection>& dets,
                                            double threshold);

std::vector<Detection> drop_hard_negatives(const std::vector<Detection>& dets);

/// Runs `backend` and throws BackendError if its output breaks the contract.
std::vector<Detection> detect_checked(const DetectorBackend& backend, const RgbImage& tile,
                                      const TileKey& key);

// ---------------------------------------------------------------------------
// Neural adapter support. Decoding and tensor packing are plain functions so
// they are testable without a runtime.

/// Row layout of a YOLO-style output tensor: each candidate is
/// (x_center, y_center, w, h, score_0, ..., score_{C-1}). Exporters emit
/// either [1, N, 4 + C] or the transposed [1, 4 + C, N].
struct YoloOutputLayout {
  std::size_t num_candidates = 0;
  std::size_t num_classes = 0;
  bool transposed = false;  // true for [1, 4 + C, N]
};

/// Validates a 3-D output shape against the expected class count. The
/// axis whose size equals 4 + num_classes is the attribute axis.
YoloOutputLayout infer_yolo_layout(std::span<const std::int64_t> shape,
                                   std::size_t num_classes);

/// Converts raw rows to tile-local detections. Class 0 is mitotic_figure,
/// class 1 hard_negative. Candidates below `min_score` are dropped and boxes
/// are clipped to the tile; empty boxes after clipping are discarded.
std::vector<Detection> decode_yolo_output(std::span<const float> output,
                                          const YoloOutputLayout& layout, int tile_size,
                                          double min_score);

/// Packs a tile as a 1 x 3 x H x W float tensor (RGB, values in [0, 1]).
std::vector<float> tile_to_tensor(const RgbImage& tile);

/// Opens an ONNX model as a detector backend. Throws BackendError when the
/// file is missing, the build lacks ONNX Runtime, or the model's input or
/// output layout does not match 1x3xSxS / YOLO rows.
std::unique_ptr<DetectorBackend> make_onnx_backend(const std::string& model_path,
                                                   int tile_size = 640,
                                                   double min_score = 0.001);

bool onnx_runtime_available() noexcept;

}  // namespace mitodet
