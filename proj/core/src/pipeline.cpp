#include "mitodet/pipeline.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include <json.hpp>

#include "mitodet/error.hpp"

namespace mitodet {

namespace {

using json = nlohmann::ordered_json;

json tta_json(const std::vector<TtaVariant>& tta) {
  json arr = json::array();
  for (const auto v : tta) arr.push_back(std::string(to_string(v)));
  return arr;
}

std::vector<TtaVariant> tta_from(const nlohmann::json& j) {
  std::vector<TtaVariant> out;
  for (const auto& v : j) out.push_back(parse_tta_variant(v.get<std::string>()));
  return out;
}

void reject_unknown(const nlohmann::json& doc, const std::set<std::string>& known,
                    const std::string& what) {
  if (!doc.is_object()) throw InvalidArgument(what + " must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw InvalidArgument("unknown " + what + " field '" + key + "'");
  }
}

template <typename Fn>
auto config_parse(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("malformed " + what + ": " + e.what());
  }
}

}  // namespace

FusionConfig PipelineConfig::fusion() const {
  FusionConfig f;
  f.nms_iou = nms_iou;
  f.wbf_iou = wbf_iou;
  f.score_mode = score_mode;
  f.support_T = support_T;
  f.conf_threshold = conf_threshold;
  f.tta = tta;
  return f;
}

void PipelineConfig::validate() const {
  grid().validate();
  fusion().validate();
  matching().validate();
  if (!(stain_apply_probability >= 0.0 && stain_apply_probability <= 1.0)) {
    throw InvalidArgument("stain_apply_probability must lie in [0, 1]");
  }
  if (!(mpp > 0.0)) throw InvalidArgument("mpp must be positive");
  if (threads == 0) throw InvalidArgument("threads must be at least 1");
}

std::string pipeline_config_to_json(const PipelineConfig& c) {
  const json doc = {{"tile_size", c.tile_size},
                    {"stride", c.stride},
                    {"nms_iou", c.nms_iou},
                    {"wbf_iou", c.wbf_iou},
                    {"score_mode", std::string(to_string(c.score_mode))},
                    {"support_T", c.support_T},
                    {"tta", tta_json(c.tta)},
                    {"conf_threshold", c.conf_threshold},
                    {"stain_apply_probability", c.stain_apply_probability},
                    {"seed", c.seed},
                    {"mpp", c.mpp},
                    {"dist_thresh_um", c.dist_thresh_um},
                    {"threads", c.threads}};
  return doc.dump(2) + "\n";
}

PipelineConfig pipeline_config_from_json(const std::string& text, PipelineConfig c) {
  return config_parse("pipeline config", [&] {
    const auto doc = nlohmann::json::parse(text);
    reject_unknown(doc,
                   {"tile_size", "stride", "nms_iou", "wbf_iou", "score_mode", "support_T",
                    "tta", "conf_threshold", "stain_apply_probability", "seed", "mpp",
                    "dist_thresh_um", "threads"},
                   "pipeline config");
    c.tile_size = doc.value("tile_size", c.tile_size);
    c.stride = doc.value("stride", c.stride);
    c.nms_iou = doc.value("nms_iou", c.nms_iou);
    c.wbf_iou = doc.value("wbf_iou", c.wbf_iou);
    if (doc.contains("score_mode")) c.score_mode = parse_score_mode(doc["score_mode"].get<std::string>());
    c.support_T = doc.value("support_T", c.support_T);
    if (doc.contains("tta")) c.tta = tta_from(doc["tta"]);
    c.conf_threshold = doc.value("conf_threshold", c.conf_threshold);
    c.stain_apply_probability = doc.value("stain_apply_probability", c.stain_apply_probability);
    c.seed = doc.value("seed", c.seed);
    c.mpp = doc.value("mpp", c.mpp);
    c.dist_thresh_um = doc.value("dist_thresh_um", c.dist_thresh_um);
    c.threads = doc.value("threads", c.threads);
    c.validate();
    return c;
  });
}

std::string fusion_config_to_json(const FusionConfig& c) {
  const json doc = {{"nms_iou", c.nms_iou},
                    {"wbf_iou", c.wbf_iou},
                    {"score_mode", std::string(to_string(c.score_mode))},
                    {"support_T", c.support_T},
                    {"conf_threshold", c.conf_threshold},
                    {"tta", tta_json(c.tta)}};
  return doc.dump(2) + "\n";
}

FusionConfig fusion_config_from_json(const std::string& text) {
  return config_parse("fusion config", [&] {
    const auto doc = nlohmann::json::parse(text);
    reject_unknown(doc, {"nms_iou", "wbf_iou", "score_mode", "support_T", "conf_threshold", "tta"},
                   "fusion config");
    FusionConfig c;
    c.nms_iou = doc.value("nms_iou", c.nms_iou);
    c.wbf_iou = doc.value("wbf_iou", c.wbf_iou);
    if (doc.contains("score_mode")) c.score_mode = parse_score_mode(doc["score_mode"].get<std::string>());
    c.support_T = doc.value("support_T", c.support_T);
    c.conf_threshold = doc.value("conf_threshold", c.conf_threshold);
    if (doc.contains("tta")) c.tta = tta_from(doc["tta"]);
    c.validate();
    return c;
  });
}

MockSettings mock_settings_from_json(const std::string& text) {
  return config_parse("mock config", [&] {
    const auto doc = nlohmann::json::parse(text);
    reject_unknown(doc,
                   {"box_size", "score_mean", "score_jitter", "position_jitter",
                    "false_positive_rate", "fp_score_mean", "fp_score_jitter", "seed",
                    "ground_truth"},
                   "mock config");
    MockSettings s;
    s.box_size = doc.value("box_size", s.box_size);
    s.score_mean = doc.value("score_mean", s.score_mean);
    s.score_jitter = doc.value("score_jitter", s.score_jitter);
    s.position_jitter = doc.value("position_jitter", s.position_jitter);
    s.false_positive_rate = doc.value("false_positive_rate", s.false_positive_rate);
    s.fp_score_mean = doc.value("fp_score_mean", s.fp_score_mean);
    s.fp_score_jitter = doc.value("fp_score_jitter", s.fp_score_jitter);
    if (doc.contains("seed")) s.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("ground_truth")) s.ground_truth = doc["ground_truth"].get<std::string>();
    return s;
  });
}

std::string mock_settings_to_json(const MockSettings& s) {
  json doc = {{"box_size", s.box_size},
              {"score_mean", s.score_mean},
              {"score_jitter", s.score_jitter},
              {"position_jitter", s.position_jitter},
              {"false_positive_rate", s.false_positive_rate},
              {"fp_score_mean", s.fp_score_mean},
              {"fp_score_jitter", s.fp_score_jitter}};
  if (s.seed) doc["seed"] = *s.seed;
  if (s.ground_truth) doc["ground_truth"] = *s.ground_truth;
  return doc.dump(2) + "\n";
}

MockBackend make_mock_backend(const MockSettings& s, const TileGrid& grid,
                              const std::vector<Annotation>& planted, std::uint64_t root_seed) {
  MockBackendConfig cfg;
  const auto assigned = assign_annotations(grid, planted);
  for (std::size_t i = 0; i < assigned.size(); ++i) {
    if (!assigned[i].annotations.empty()) cfg.ground_truth[i] = assigned[i].annotations;
  }
  cfg.tile_size = grid.config.tile_size;
  cfg.box_size = s.box_size;
  cfg.score_mean = s.score_mean;
  cfg.score_jitter = s.score_jitter;
  cfg.position_jitter = s.position_jitter;
  cfg.false_positive_rate = s.false_positive_rate;
  cfg.fp_score_mean = s.fp_score_mean;
  cfg.fp_score_jitter = s.fp_score_jitter;
  cfg.seed = s.seed ? *s.seed : Rng::derive(root_seed, "mock/" + grid.roi.id).next_u64();
  return MockBackend(std::move(cfg));
}

namespace {

struct TileOutput {
  std::vector<std::vector<Detection>> per_variant;
  bool stain_normalized = false;
};

// Runs `work(i)` for i in [0, n) on `threads` workers. The exception from
// the lowest failing index is rethrown, so errors are as deterministic as
// results.
template <typename Work>
void parallel_for(std::size_t n, std::size_t threads, Work&& work) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        work(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t count = std::min(threads, n);
  if (count <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(count);
    for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

PipelineResult run_pipeline(const std::vector<RoiInput>& rois, const PipelineConfig& config,
                            const BackendSelection& backend, const StainBank* bank) {
  config.validate();
  if (!backend.mock && !backend.shared) throw InvalidArgument("no detector backend selected");
  if (backend.shared && backend.shared->tile_size() != config.tile_size) {
    throw InvalidArgument("backend tile size differs from the configured tile_size");
  }
  StainBank stain;
  if (bank) {
    stain = *bank;
    stain.apply_probability = config.stain_apply_probability;
    stain.validate();
  }

  PipelineResult result;
  std::vector<ImageEval> evals;
  std::set<std::string> ids;
  for (const auto& input : rois) {
    if (!ids.insert(input.roi.id).second) {
      throw InvalidArgument("duplicate ROI id '" + input.roi.id + "'");
    }
    if (input.image.width() != input.roi.width_px || input.image.height() != input.roi.height_px) {
      throw InvalidArgument("image size of ROI '" + input.roi.id + "' differs from its spec");
    }
    RoiResult roi_result;
    roi_result.roi_id = input.roi.id;
    roi_result.grid = plan_grid(input.roi, config.grid());
    const TileGrid& grid = roi_result.grid;

    std::shared_ptr<const DetectorBackend> detector = backend.shared;
    if (backend.mock) {
      detector = std::make_shared<MockBackend>(
          make_mock_backend(*backend.mock, grid, input.planted, config.seed));
    }
    std::mutex detector_mutex;
    const bool serialize = !detector->thread_safe();

    std::vector<TileOutput> outputs(grid.tiles.size());
    parallel_for(grid.tiles.size(), config.threads, [&](std::size_t i) {
      const TileSpec& tile = grid.tiles[i];
      RgbImage pixels = input.image.crop(tile.origin_x, tile.origin_y, tile.size, tile.size);
      if (bank && !stain.profiles.empty()) {
        Rng rng = Rng::derive(config.seed, "stain/" + input.roi.id, i);
        auto applied = stochastic_apply(pixels, stain, rng);
        outputs[i].stain_normalized = applied.profile.has_value() && !applied.skipped;
        pixels = std::move(applied.image);
      }
      for (const auto variant : config.tta) {
        const RgbImage view = apply_tta(pixels, variant);
        std::vector<Detection> dets;
        if (serialize) {
          std::lock_guard lock(detector_mutex);
          dets = detect_checked(*detector, view, {i, variant});
        } else {
          dets = detect_checked(*detector, view, {i, variant});
        }
        for (auto& d : dets) d.provenance = Provenance{i, variant};
        outputs[i].per_variant.push_back(drop_hard_negatives(dets));
      }
    });

    for (std::size_t i = 0; i < outputs.size(); ++i) {
      for (std::size_t v = 0; v < config.tta.size(); ++v) {
        roi_result.raw[{i, config.tta[v]}] = std::move(outputs[i].per_variant[v]);
      }
      if (outputs[i].stain_normalized) ++roi_result.stain_normalized_tiles;
    }
    roi_result.fused = stitch(roi_result.raw, grid, config.fusion(), &roi_result.stats);

    if (input.has_ground_truth) {
      evals.push_back({input.roi.id, roi_result.fused, input.ground_truth,
                       config.matching().threshold_px(input.roi.mpp)});
    }
    result.rois.push_back(std::move(roi_result));
  }
  if (!evals.empty()) result.report = evaluate(evals);
  return result;
}

}  // namespace mitodet
