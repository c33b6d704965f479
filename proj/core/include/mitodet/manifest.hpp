#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mitodet/random.hpp"
#include "mitodet/tiler.hpp"
#include "mitodet/types.hpp"

namespace mitodet {

struct TileRecord {
  std::string tile_id;  // "<roi_id>/r<row>_c<col>"
  std::string roi_id;
  int origin_x = 0;
  int origin_y = 0;
  bool background = true;
  Domain domain = Domain::kHuman;
  std::size_t annotation_count = 0;

  friend bool operator==(const TileRecord&, const TileRecord&) = default;
};

struct ManifestConfig {
  std::size_t background_supplement = 80000;
  std::size_t batch_size = 64;
  double human_fraction = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  /// Human tiles per batch, rounding half up.
  std::size_t humans_per_batch() const;
};

/// One ROI's tiling and ground truth.
struct RoiTiles {
  TileGrid grid;
  std::vector<Annotation> annotations;
};

struct ManifestResult {
  std::vector<TileRecord> records;  // annotated tiles, then sampled background
  std::size_t human_tiles = 0;
  std::size_t canine_tiles = 0;
  std::size_t background_available = 0;
  std::vector<std::string> warnings;
};

/// Keeps every annotated tile and a seeded uniform sample (global, without
/// replacement) of `background_supplement` background tiles. Asking for more
/// background than exists takes all of it and warns.
ManifestResult build_manifest(const std::vector<RoiTiles>& rois, const ManifestConfig& config);

using Batch = std::vector<std::string>;

/// Infinite, seeded sequence of domain-balanced batches. Each domain is
/// drawn without replacement from successive shuffled passes over its tiles,
/// so the smaller domain recycles while the larger one is still in its
/// first pass.
class BalancedBatchSampler {
 public:
  BalancedBatchSampler(const std::vector<TileRecord>& manifest, const ManifestConfig& config);

  Batch next();

  /// Batches needed for the domain with the most batches-worth of tiles to
  /// complete one pass.
  std::size_t batches_per_epoch() const noexcept { return batches_per_epoch_; }
  std::size_t humans_per_batch() const noexcept { return n_human_; }
  std::size_t canines_per_batch() const noexcept { return n_canine_; }

 private:
  class Stream {
   public:
    Stream(std::vector<std::string> ids, Rng rng);
    void draw(std::size_t count, Batch& batch);
    bool empty() const noexcept { return ids_.empty(); }
    std::size_t size() const noexcept { return ids_.size(); }

   private:
    void reshuffle(const Batch& batch);

    std::vector<std::string> ids_;
    std::vector<std::string> order_;
    std::size_t pos_ = 0;
    Rng rng_;
  };

  std::size_t n_human_ = 0;
  std::size_t n_canine_ = 0;
  std::size_t batches_per_epoch_ = 0;
  Stream human_;
  Stream canine_;
};

/// First `count` batches of a BalancedBatchSampler; count = 0 means one epoch.
std::vector<Batch> balanced_batches(const std::vector<TileRecord>& manifest,
                                    const ManifestConfig& config, std::size_t count = 0);

std::string tile_record_to_json(const TileRecord& record);
TileRecord tile_record_from_json(const std::string& line);

}  // namespace mitodet
