#include "app.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "image_io.hpp"
#include "mitodet/detect.hpp"
#include "mitodet/error.hpp"
#include "mitodet/eval.hpp"
#include "mitodet/fusion.hpp"
#include "mitodet/interchange.hpp"
#include "mitodet/manifest.hpp"
#include "mitodet/pipeline.hpp"
#include "mitodet/stain.hpp"
#include "mitodet/tiler.hpp"

namespace mitodet::app {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw InputError("error reading '" + path.string() + "'");
  return ss.str();
}

// Files are written under a temporary name and renamed into place only
// after every output of the command has been written.
class Outputs {
 public:
  void add(fs::path path, std::string content) {
    files_.emplace_back(std::move(path), std::move(content));
  }

  void commit() {
    std::vector<fs::path> staged;
    try {
      for (const auto& [path, content] : files_) {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        fs::path tmp = path;
        tmp += ".partial";
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        staged.push_back(tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.close();
        if (!out) throw InputError("cannot write '" + path.string() + "'");
      }
      for (std::size_t i = 0; i < files_.size(); ++i) fs::rename(staged[i], files_[i].first);
    } catch (const fs::filesystem_error& e) {
      discard(staged);
      throw InputError(e.what());
    } catch (...) {
      discard(staged);
      throw;
    }
  }

 private:
  static void discard(const std::vector<fs::path>& staged) {
    std::error_code ec;
    for (const auto& p : staged) fs::remove(p, ec);
  }

  std::vector<std::pair<fs::path, std::string>> files_;
};

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string out_dir;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;

  void attach(CLI::App* cmd, const std::string& config_help = "pipeline config JSON") {
    cmd->add_option("--config", config, config_help);
    seed_opt = cmd->add_option("--seed", seed, "root seed");
    threads_opt = cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--out-dir", out_dir, "directory for outputs");
  }

  PipelineConfig pipeline() const {
    PipelineConfig cfg;
    if (!config.empty()) cfg = pipeline_config_from_json(read_text(config));
    if (seed_opt->count() > 0) cfg.seed = seed;
    if (threads_opt->count() > 0) cfg.threads = threads;
    return cfg;
  }

  fs::path out(const std::string& path) const {
    const fs::path p(path);
    if (out_dir.empty() || p.is_absolute()) return p;
    return fs::path(out_dir) / p;
  }
};

using AnnotationsById = std::map<std::string, std::vector<Annotation>>;

AnnotationsById read_annotations_file(const fs::path& path) {
  std::istringstream in(read_text(path));
  AnnotationsById out;
  for (auto& rec : read_annotations(in)) out[rec.roi_id].push_back(rec.annotation);
  return out;
}

std::map<std::string, std::vector<Detection>> read_detections_file(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::map<std::string, std::vector<Detection>> out;
  for (auto& rec : read_detections(in)) out[rec.roi_id].push_back(std::move(rec.detection));
  return out;
}

void check_annotations(const std::vector<Annotation>& anns, const RoiSpec& roi,
                       const std::string& source) {
  for (const auto& a : anns) {
    try {
      validate_annotation(a, roi);
    } catch (const InvalidArgument& e) {
      throw InputError(source + ": " + e.what());
    }
  }
}

void warn(const std::string& message) { std::cerr << "mitodet: warning: " << message << "\n"; }

// Shared by `infer` and `run`.
struct DetectInputs {
  std::vector<std::string> images;
  std::string roi_specs;
  std::string mock;
  std::string model;
  std::string bank;
  std::string gt;

  void attach(CLI::App* cmd, bool many) {
    auto* roi = cmd->add_option("--roi", images, many ? "ROI image (repeatable)" : "ROI image")
                    ->required()
                    ->check(CLI::ExistingFile);
    if (!many) roi->expected(1);
    cmd->add_option("--rois", roi_specs, "JSON list of ROI specs matched by id (image stem)");
    auto* mock_opt = cmd->add_option("--mock", mock, "mock detector settings JSON");
    auto* model_opt = cmd->add_option("--model", model, "ONNX model file");
    mock_opt->excludes(model_opt);
    cmd->add_option("--bank", bank, "stain bank JSON for stochastic normalization");
    cmd->add_option("--gt", gt, "ground-truth annotations (JSON lines)");
  }

  BackendSelection backend(const PipelineConfig& cfg) const {
    BackendSelection sel;
    if (!mock.empty()) {
      sel.mock = mock_settings_from_json(read_text(mock));
    } else if (!model.empty()) {
      sel.shared = make_onnx_backend(model, cfg.tile_size);
    } else {
      throw InvalidArgument("one of --mock or --model is required");
    }
    return sel;
  }

  std::optional<StainBank> stain_bank() const {
    if (bank.empty()) return std::nullopt;
    return bank_from_json(read_text(bank));
  }

  std::vector<RoiInput> rois(const PipelineConfig& cfg, const BackendSelection& sel) const {
    std::map<std::string, RoiSpec> specs;
    if (!roi_specs.empty()) {
      for (auto& s : rois_from_json(read_text(roi_specs))) specs.emplace(s.id, std::move(s));
    }
    std::optional<AnnotationsById> truth;
    if (!gt.empty()) truth = read_annotations_file(gt);
    std::optional<AnnotationsById> planted;
    if (sel.mock && sel.mock->ground_truth) {
      planted = read_annotations_file(fs::path(mock).parent_path() / *sel.mock->ground_truth);
    } else if (sel.mock) {
      planted = truth;
    }

    std::vector<RoiInput> out;
    for (const auto& path : images) {
      RoiInput in;
      in.image = read_image(path);
      const std::string id = fs::path(path).stem().string();
      if (const auto it = specs.find(id); it != specs.end()) {
        in.roi = it->second;
        if (in.roi.width_px != in.image.width() || in.roi.height_px != in.image.height()) {
          throw InputError("image '" + path + "' does not match the size in its ROI spec");
        }
      } else {
        in.roi = RoiSpec{id, in.image.width(), in.image.height(), cfg.mpp, Domain::kHuman, ""};
      }
      if (truth) {
        in.has_ground_truth = true;
        if (const auto it = truth->find(id); it != truth->end()) in.ground_truth = it->second;
        check_annotations(in.ground_truth, in.roi, gt);
      }
      if (planted) {
        if (const auto it = planted->find(id); it != planted->end()) in.planted = it->second;
        check_annotations(in.planted, in.roi, "mock ground truth");
      }
      out.push_back(std::move(in));
    }
    return out;
  }
};

// Fused detections are in the ROI frame, so the tile/variant tags of their
// first cluster member are not written.
std::string detections_text(const std::string& roi_id, std::vector<Detection> dets) {
  for (auto& d : dets) d.provenance.reset();
  std::ostringstream os;
  write_detections(os, roi_id, dets);
  return os.str();
}

std::string raw_text(const RoiResult& r) {
  std::ostringstream os;
  for (const auto& [key, dets] : r.raw) write_detections(os, r.roi_id, dets);
  return os.str();
}

class Cli {
 public:
  Cli() : app_("Mitotic figure detection pipeline: tiling, stain augmentation, detection, "
               "fusion, evaluation and training manifests.",
               "mitodet") {
    app_.require_subcommand(1);
    app_.set_version_flag("--version", "mitodet 0.1.0");
    add_plan_tiles();
    add_fit_stain_bank();
    add_normalize();
    add_infer();
    add_fuse();
    add_evaluate();
    add_make_manifest();
    add_sample_batches();
    add_run();
  }

  CLI::App& app() { return app_; }

  void dispatch() {
    for (auto& [cmd, action] : actions_) {
      if (cmd->parsed()) {
        action();
        return;
      }
    }
  }

 private:
  CLI::App* command(const std::string& name, const std::string& help, std::function<void()> fn) {
    CLI::App* cmd = app_.add_subcommand(name, help);
    actions_.emplace_back(cmd, std::move(fn));
    return cmd;
  }

  void add_plan_tiles() {
    struct Opts {
      Common common;
      int width = 0, height = 0, tile = 0, stride = 0;
      std::string id = "roi", out = "grid.json";
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = command("plan-tiles", "Plan the overlapping tile grid of one ROI", [o] {
      auto cfg = o->common.pipeline();
      if (o->tile > 0) cfg.tile_size = o->tile;
      if (o->stride > 0) cfg.stride = o->stride;
      cfg.validate();
      const auto grid = plan_grid(RoiSpec{o->id, o->width, o->height, cfg.mpp, Domain::kHuman, ""}, cfg.grid());
      Outputs outs;
      outs.add(o->common.out(o->out), grid_to_json(grid));
      outs.commit();
    });
    o->common.attach(cmd);
    cmd->add_option("--roi-width", o->width, "ROI width in pixels")->required();
    cmd->add_option("--roi-height", o->height, "ROI height in pixels")->required();
    cmd->add_option("--roi-id", o->id, "ROI id recorded in the grid");
    cmd->add_option("--tile-size", o->tile, "tile edge in pixels");
    cmd->add_option("--stride", o->stride, "tile stride in pixels");
    cmd->add_option("--out", o->out, "grid JSON output");
  }

  void add_fit_stain_bank() {
    struct Opts {
      Common common;
      std::string images, out = "bank.json";
      std::size_t n = 50;
      double p = -1.0;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = command("fit-stain-bank", "Fit a stain profile bank from a directory of ROI images", [o] {
      const auto cfg = o->common.pipeline();
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(o->images)) {
        if (entry.is_regular_file() && is_image_path(entry.path())) files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      std::vector<std::pair<std::string, RgbImage>> images;
      for (const auto& f : files) images.emplace_back(f.stem().string(), read_image(f));
      const double p = o->p >= 0.0 ? o->p : cfg.stain_apply_probability;
      auto result = build_bank(images, o->n, p);
      for (const auto& w : result.warnings) warn(w);
      Outputs outs;
      outs.add(o->common.out(o->out), bank_to_json(result.bank));
      outs.commit();
    });
    o->common.attach(cmd);
    cmd->add_option("--images", o->images, "directory of PNG/TIFF ROI images")
        ->required()
        ->check(CLI::ExistingDirectory);
    cmd->add_option("--n", o->n, "number of ROIs to fit (in file-name order)");
    cmd->add_option("--p", o->p, "apply probability stored in the bank");
    cmd->add_option("--out", o->out, "bank JSON output");
  }

  void add_normalize() {
    struct Opts {
      Common common;
      std::string image, bank, profile, out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = command("normalize", "Normalize one image to a bank profile", [o] {
      const auto bank = bank_from_json(read_text(o->bank));
      const auto& target = bank.profiles.at(bank.find(o->profile));
      const auto image = read_image(o->image);
      const fs::path out = o->common.out(o->out);
      Outputs outs;
      outs.add(out, encode_image(out, normalize(image, target)));
      outs.commit();
    });
    o->common.attach(cmd);
    cmd->add_option("--image", o->image, "input PNG/TIFF")->required()->check(CLI::ExistingFile);
    cmd->add_option("--bank", o->bank, "stain bank JSON")->required();
    cmd->add_option("--profile", o->profile, "profile source id or index")->required();
    cmd->add_option("--out", o->out, "output PNG/TIFF")->required();
  }

  void add_infer() {
    struct Opts {
      Common common;
      DetectInputs in;
      std::string out = "raw.jsonl", grid_out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = command("infer", "Run the detector on every tile and TTA variant of one ROI", [o] {
      auto cfg = o->common.pipeline();
      cfg.validate();
      const auto sel = o->in.backend(cfg);
      const auto bank = o->in.stain_bank();
      const auto rois = o->in.rois(cfg, sel);
      const auto result = run_pipeline(rois, cfg, sel, bank ? &*bank : nullptr);
      const RoiResult& r = result.rois.front();
      Outputs outs;
      outs.add(o->common.out(o->out), raw_text(r));
      if (!o->grid_out.empty()) outs.add(o->common.out(o->grid_out), grid_to_json(r.grid));
      outs.commit();
    });
    o->common.attach(cmd);
    o->in.attach(cmd, false);
    cmd->add_option("--out", o->out, "raw per-tile detections (JSON lines, tile frame)");
    cmd->add_option("--grid-out", o->grid_out, "also write the tile grid JSON");
  }

  void add_fuse() {
    struct Opts {
      Common common;
      std::string dets, grid, out = "fused.jsonl";
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = command("fuse", "Stitch raw per-tile detections into ROI detections", [o] {
      FusionConfig fc;
      if (!o->common.config.empty()) fc = fusion_config_from_json(read_text(o->common.config));
      const TileGrid grid = grid_from_json(read_text(o->grid));
      std::istringstream in(read_text(o->dets));
      TileDetections per_tile;
      std::size_t skipped = 0;
      for (auto& rec : read_detections(in)) {
        if (rec.roi_id != grid.roi.id) {
          ++skipped;
          continue;
        }
        if (!rec.detection.provenance) {
          throw InputError("raw detection without tile/variant in '" + o->dets + "'");
        }
        const auto& p = *rec.detection.provenance;
        per_tile[{p.tile_index, p.variant}].push_back(rec.detection);
      }
      if (skipped > 0) {
        warn("ignored " + std::to_string(skipped) + " detections of ROIs other than '" +
             grid.roi.id + "'");
      }
      Outputs outs;
      outs.add(o->common.out(o->out), detections_text(grid.roi.id, stitch(per_tile, grid, fc)));
      outs.commit();
    });
    o->common.attach(cmd, "fusion config JSON");
    cmd->add_option("--dets", o->dets, "raw detections from infer")->required();
    cmd->add_option("--grid", o->grid, "tile grid JSON")->required();
    cmd->add_option("--out", o->out, "fused detections output");
  }

  void add_evaluate() {
    struct Opts {
      Common common;
      std::string preds, gt, out = "report.json";
      double mpp = 0.0, dist_um = 0.0;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = command("evaluate", "Score detections against point annotations", [o] {
      auto cfg = o->common.pipeline();
      if (o->mpp > 0.0) cfg.mpp = o->mpp;
      if (o->dist_um > 0.0) cfg.dist_thresh_um = o->dist_um;
      cfg.validate();
      const auto preds = read_detections_file(o->preds);
      const auto gts = read_annotations_file(o->gt);
      std::map<std::string, ImageEval> images;
      const double px = cfg.matching().threshold_px(cfg.mpp);
      for (const auto& [id, anns] : gts) images[id] = ImageEval{id, {}, anns, px};
      for (const auto& [id, dets] : preds) {
        auto& img = images[id];
        img.roi_id = id;
        img.preds = dets;
        img.threshold_px = px;
      }
      if (images.empty()) throw InputError("no predictions or annotations to evaluate");
      std::vector<ImageEval> list;
      for (auto& [id, img] : images) list.push_back(std::move(img));
      Outputs outs;
      outs.add(o->common.out(o->out), report_to_json(evaluate(list)));
      outs.commit();
    });
    o->common.attach(cmd);
    cmd->add_option("--preds", o->preds, "fused detections (JSON lines)")->required();
    cmd->add_option("--gt", o->gt, "annotations (JSON lines)")->required();
    cmd->add_option("--mpp", o->mpp, "microns per pixel");
    cmd->add_option("--dist-um", o->dist_um, "match radius in microns");
    cmd->add_option("--out", o->out, "report JSON output");
  }

  void add_make_manifest() {
    struct Opts {
      Common common;
      std::string rois, gt, out = "manifest.jsonl";
      std::size_t background = 80000;
      int tile = 0, stride = 0;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = command("make-manifest", "List annotated tiles plus sampled background tiles", [o] {
      auto cfg = o->common.pipeline();
      if (o->tile > 0) cfg.tile_size = o->tile;
      if (o->stride > 0) cfg.stride = o->stride;
      cfg.validate();
      const auto specs = rois_from_json(read_text(o->rois));
      AnnotationsById anns;
      if (!o->gt.empty()) anns = read_annotations_file(o->gt);
      std::vector<RoiTiles> tiles;
      for (const auto& spec : specs) {
        RoiTiles t{plan_grid(spec, cfg.grid()), {}};
        if (const auto it = anns.find(spec.id); it != anns.end()) t.annotations = it->second;
        check_annotations(t.annotations, spec, o->gt);
        tiles.push_back(std::move(t));
      }
      ManifestConfig mc;
      mc.background_supplement = o->background;
      mc.seed = cfg.seed;
      const auto manifest = build_manifest(tiles, mc);
      for (const auto& w : manifest.warnings) warn(w);
      std::string text;
      for (const auto& r : manifest.records) text += tile_record_to_json(r) + "\n";
      Outputs outs;
      outs.add(o->common.out(o->out), std::move(text));
      outs.commit();
    });
    o->common.attach(cmd);
    cmd->add_option("--rois", o->rois, "JSON list of ROI specs")->required();
    cmd->add_option("--gt", o->gt, "annotations (JSON lines)");
    cmd->add_option("--background", o->background, "background tiles to sample");
    cmd->add_option("--tile-size", o->tile, "tile edge in pixels");
    cmd->add_option("--stride", o->stride, "tile stride in pixels");
    cmd->add_option("--out", o->out, "manifest output (JSON lines)");
  }

  void add_sample_batches() {
    struct Opts {
      Common common;
      std::string manifest, out = "batches.jsonl";
      std::size_t batch = 64, count = 0;
      double fraction = 0.5;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = command("sample-batches", "Draw domain-balanced training batches", [o] {
      const auto cfg = o->common.pipeline();
      std::vector<TileRecord> records;
      std::istringstream in(read_text(o->manifest));
      std::string line;
      std::size_t line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
          records.push_back(tile_record_from_json(line));
        } catch (const InputError& e) {
          throw InputError(o->manifest + " line " + std::to_string(line_no) + ": " + e.what());
        }
      }
      ManifestConfig mc;
      mc.batch_size = o->batch;
      mc.human_fraction = o->fraction;
      mc.seed = cfg.seed;
      std::string text;
      std::size_t i = 0;
      for (const auto& b : balanced_batches(records, mc, o->count)) {
        const nlohmann::ordered_json j = {{"batch", i++}, {"tiles", b}};
        text += j.dump() + "\n";
      }
      Outputs outs;
      outs.add(o->common.out(o->out), std::move(text));
      outs.commit();
    });
    o->common.attach(cmd);
    cmd->add_option("--manifest", o->manifest, "manifest (JSON lines)")->required();
    cmd->add_option("--batch", o->batch, "batch size");
    cmd->add_option("--fraction", o->fraction, "human share of each batch");
    cmd->add_option("--count", o->count, "batches to draw (0: one epoch)");
    cmd->add_option("--out", o->out, "batches output (JSON lines)");
  }

  void add_run() {
    struct Opts {
      Common common;
      DetectInputs in;
      double conf = -1.0;
      bool intermediate = false;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = command("run", "End-to-end: tile, augment, detect, fuse and evaluate", [o] {
      auto cfg = o->common.pipeline();
      if (o->conf >= 0.0) cfg.conf_threshold = o->conf;
      cfg.validate();
      const auto sel = o->in.backend(cfg);
      const auto bank = o->in.stain_bank();
      const auto rois = o->in.rois(cfg, sel);
      const auto result = run_pipeline(rois, cfg, sel, bank ? &*bank : nullptr);

      Outputs outs;
      std::string fused, raw;
      for (const auto& r : result.rois) {
        fused += detections_text(r.roi_id, r.fused);
        if (o->intermediate) {
          raw += raw_text(r);
          outs.add(o->common.out("grids/" + r.roi_id + ".json"), grid_to_json(r.grid));
        }
      }
      outs.add(o->common.out("fused.jsonl"), std::move(fused));
      if (o->intermediate) outs.add(o->common.out("raw.jsonl"), std::move(raw));
      if (result.report) outs.add(o->common.out("report.json"), report_to_json(*result.report));
      outs.add(o->common.out("config.resolved.json"), pipeline_config_to_json(cfg));
      outs.commit();
    });
    o->common.attach(cmd);
    o->in.attach(cmd, true);
    cmd->add_option("--conf-threshold", o->conf, "override the final confidence threshold");
    cmd->add_flag("--save-intermediate", o->intermediate, "also write raw.jsonl and grids/");
  }

  CLI::App app_;
  std::vector<std::pair<CLI::App*, std::function<void()>>> actions_;
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
      return kConfigError;
    case ErrorKind::kInput:
    case ErrorKind::kFrame:
    case ErrorKind::kStain:
      return kInputError;
    case ErrorKind::kBackend:
      return kBackendError;
  }
  return kFailure;
}

}  // namespace

int main(int argc, const char* const* argv) {
  Cli cli;
  try {
    cli.app().parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return cli.app().exit(e) == 0 ? kOk : kConfigError;
  }
  try {
    cli.dispatch();
    return kOk;
  } catch (const Error& e) {
    std::cerr << "mitodet: error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "mitodet: error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "mitodet: error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace mitodet::app
