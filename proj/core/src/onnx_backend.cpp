#include <filesystem>
#include <memory>
#include <string>

#include "mitodet/detect.hpp"
#include "mitodet/error.hpp"

#ifdef MITODET_WITH_ONNXRUNTIME
#include <array>
#include <mutex>

#include <onnxruntime_cxx_api.h>
#endif

namespace mitodet {

#ifdef MITODET_WITH_ONNXRUNTIME

namespace {

constexpr std::size_t kNumClasses = 2;  // mitotic_figure, hard_negative

class OnnxBackend final : public DetectorBackend {
 public:
  OnnxBackend(const std::string& path, int tile_size, double min_score)
      : env_(ORT_LOGGING_LEVEL_WARNING, "mitodet"),
        session_(env_, path.c_str(), Ort::SessionOptions{}),
        tile_size_(tile_size),
        min_score_(min_score) {
    if (session_.GetInputCount() != 1 || session_.GetOutputCount() < 1) {
      throw BackendError("model must have one input and at least one output");
    }
    Ort::AllocatorWithDefaultOptions alloc;
    input_name_ = session_.GetInputNameAllocated(0, alloc).get();
    output_name_ = session_.GetOutputNameAllocated(0, alloc).get();

    const auto in_shape =
        session_.GetInputTypeInfo(0).GetTensorTypeAndShapeInfo().GetShape();
    const std::vector<std::int64_t> expected{1, 3, tile_size, tile_size};
    if (in_shape.size() != 4) throw BackendError("model input must be 4-D (1x3xSxS)");
    for (std::size_t i = 0; i < 4; ++i) {
      if (in_shape[i] > 0 && in_shape[i] != expected[i]) {
        throw BackendError("model input shape does not match 1x3x" +
                           std::to_string(tile_size) + "x" + std::to_string(tile_size));
      }
    }
    auto out_shape = session_.GetOutputTypeInfo(0).GetTensorTypeAndShapeInfo().GetShape();
    // Dynamic candidate counts are resolved per call; only the class axis is
    // checked here.
    for (auto& d : out_shape) {
      if (d < 0) d = 1;
    }
    if (out_shape.size() != 3 ||
        (out_shape[1] != 4 + kNumClasses && out_shape[2] != 4 + kNumClasses)) {
      throw BackendError("model output must be YOLO rows with 2 class scores");
    }
  }

  std::vector<Detection> detect(const RgbImage& tile, const TileKey& key) const override {
    if (tile.width() != tile_size_ || tile.height() != tile_size_) {
      throw BackendError("onnx backend received a tile of the wrong size");
    }
    std::vector<float> tensor = tile_to_tensor(tile);
    const std::array<std::int64_t, 4> shape{1, 3, tile_size_, tile_size_};
    const auto mem = Ort::MemoryInfo::CreateCpu(OrtArenaAllocator, OrtMemTypeDefault);
    Ort::Value input = Ort::Value::CreateTensor<float>(mem, tensor.data(), tensor.size(),
                                                       shape.data(), shape.size());
    const char* in_names[] = {input_name_.c_str()};
    const char* out_names[] = {output_name_.c_str()};
    std::vector<Ort::Value> outputs;
    {
      std::lock_guard lock(mutex_);
      outputs = session_.Run(Ort::RunOptions{nullptr}, in_names, &input, 1, out_names, 1);
    }
    const auto info = outputs[0].GetTensorTypeAndShapeInfo();
    const auto out_shape = info.GetShape();
    const auto layout = infer_yolo_layout(out_shape, kNumClasses);
    const float* data = outputs[0].GetTensorData<float>();
    auto dets = decode_yolo_output({data, info.GetElementCount()}, layout, tile_size_,
                                   min_score_);
    for (auto& d : dets) d.provenance = Provenance{key.tile_index, key.variant};
    return dets;
  }

  int tile_size() const override { return tile_size_; }
  std::string name() const override { return "onnx"; }
  bool thread_safe() const override { return false; }

 private:
  Ort::Env env_;
  mutable Ort::Session session_;
  mutable std::mutex mutex_;
  std::string input_name_;
  std::string output_name_;
  int tile_size_;
  double min_score_;
};

}  // namespace

bool onnx_runtime_available() noexcept { return true; }

std::unique_ptr<DetectorBackend> make_onnx_backend(const std::string& model_path,
                                                   int tile_size, double min_score) {
  if (!std::filesystem::is_regular_file(model_path)) {
    throw BackendError("model file not found: " + model_path);
  }
  try {
    return std::make_unique<OnnxBackend>(model_path, tile_size, min_score);
  } catch (const Ort::Exception& e) {
    throw BackendError(std::string("failed to load ONNX model: ") + e.what());
  }
}

#else

bool onnx_runtime_available() noexcept { return false; }

std::unique_ptr<DetectorBackend> make_onnx_backend(const std::string& model_path,
                                                   int /*tile_size*/, double /*min_score*/) {
  if (!std::filesystem::is_regular_file(model_path)) {
    throw BackendError("model file not found: " + model_path);
  }
  throw BackendError("this build has no ONNX Runtime support; rebuild with "
                     "-DMITODET_WITH_ONNXRUNTIME=ON or use the mock backend");
}

#endif

}  // namespace mitodet
