#include "mitodet/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <json.hpp>

#include "mitodet/error.hpp"

namespace mitodet {

void ManifestConfig::validate() const {
  if (!(human_fraction >= 0.0 && human_fraction <= 1.0)) {
    throw InvalidArgument("human_fraction must lie in [0, 1]");
  }
  if (batch_size < 2) throw InvalidArgument("batch_size must be at least 2");
}

std::size_t ManifestConfig::humans_per_batch() const {
  return static_cast<std::size_t>(std::floor(static_cast<double>(batch_size) * human_fraction + 0.5));
}

namespace {

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.uniform_index(i)]);
  }
}

std::string make_tile_id(const std::string& roi_id, const TileSpec& t) {
  return roi_id + "/r" + std::to_string(t.row) + "_c" + std::to_string(t.col);
}

}  // namespace

ManifestResult build_manifest(const std::vector<RoiTiles>& rois, const ManifestConfig& config) {
  config.validate();
  ManifestResult result;
  std::vector<TileRecord> background;
  std::unordered_set<std::string> roi_ids;
  for (const auto& roi : rois) {
    const auto& spec = roi.grid.roi;
    if (!roi_ids.insert(spec.id).second) {
      throw InvalidArgument("duplicate ROI id '" + spec.id + "' in manifest input");
    }
    const auto assigned = assign_annotations(roi.grid, roi.annotations);
    for (const auto& tile : roi.grid.tiles) {
      const auto& slot = assigned[tile.index];
      TileRecord rec{make_tile_id(spec.id, tile), spec.id, tile.origin_x, tile.origin_y,
                     slot.background, spec.domain, slot.annotations.size()};
      if (rec.background) {
        background.push_back(std::move(rec));
      } else {
        result.records.push_back(std::move(rec));
      }
    }
  }

  result.background_available = background.size();
  std::size_t take = config.background_supplement;
  if (take > background.size()) {
    result.warnings.push_back("requested " + std::to_string(take) +
                              " background tiles but only " +
                              std::to_string(background.size()) + " exist; taking all");
    take = background.size();
  }
  std::vector<std::size_t> picks(background.size());
  for (std::size_t i = 0; i < picks.size(); ++i) picks[i] = i;
  Rng rng = Rng::derive(config.seed, "manifest.background");
  shuffle(picks, rng);
  picks.resize(take);
  std::sort(picks.begin(), picks.end());
  for (const std::size_t i : picks) result.records.push_back(std::move(background[i]));

  for (const auto& r : result.records) {
    (r.domain == Domain::kHuman ? result.human_tiles : result.canine_tiles) += 1;
  }
  return result;
}

BalancedBatchSampler::Stream::Stream(std::vector<std::string> ids, Rng rng)
    : ids_(std::move(ids)), rng_(rng) {}

void BalancedBatchSampler::Stream::reshuffle(const Batch& batch) {
  order_ = ids_;
  shuffle(order_, rng_);
  // Tiles already in the batch being filled move to the back of the new
  // pass, so a batch never repeats a tile when the domain is large enough.
  const std::unordered_set<std::string> in_batch(batch.begin(), batch.end());
  std::stable_partition(order_.begin(), order_.end(),
                        [&](const std::string& id) { return !in_batch.contains(id); });
  pos_ = 0;
}

void BalancedBatchSampler::Stream::draw(std::size_t count, Batch& batch) {
  for (std::size_t k = 0; k < count; ++k) {
    if (pos_ == order_.size()) reshuffle(batch);
    batch.push_back(order_[pos_++]);
  }
}

namespace {

std::vector<std::string> ids_for(const std::vector<TileRecord>& manifest, Domain domain) {
  std::vector<std::string> ids;
  for (const auto& r : manifest) {
    if (r.domain == domain) ids.push_back(r.tile_id);
  }
  return ids;
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

}  // namespace

BalancedBatchSampler::BalancedBatchSampler(const std::vector<TileRecord>& manifest,
                                           const ManifestConfig& config)
    : human_(ids_for(manifest, Domain::kHuman), Rng::derive(config.seed, "batches.human")),
      canine_(ids_for(manifest, Domain::kCanine), Rng::derive(config.seed, "batches.canine")) {
  config.validate();
  n_human_ = config.humans_per_batch();
  n_canine_ = config.batch_size - n_human_;
  if (n_human_ > 0 && human_.empty()) {
    throw InvalidArgument("batches need human tiles but the manifest has none");
  }
  if (n_canine_ > 0 && canine_.empty()) {
    throw InvalidArgument("batches need canine tiles but the manifest has none");
  }
  if (n_human_ > 0) batches_per_epoch_ = ceil_div(human_.size(), n_human_);
  if (n_canine_ > 0) {
    batches_per_epoch_ = std::max(batches_per_epoch_, ceil_div(canine_.size(), n_canine_));
  }
}

Batch BalancedBatchSampler::next() {
  Batch batch;
  batch.reserve(n_human_ + n_canine_);
  human_.draw(n_human_, batch);
  canine_.draw(n_canine_, batch);
  return batch;
}

std::vector<Batch> balanced_batches(const std::vector<TileRecord>& manifest,
                                    const ManifestConfig& config, std::size_t count) {
  BalancedBatchSampler sampler(manifest, config);
  if (count == 0) count = sampler.batches_per_epoch();
  std::vector<Batch> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sampler.next());
  return out;
}

std::string tile_record_to_json(const TileRecord& r) {
  const nlohmann::ordered_json j = {{"tile_id", r.tile_id},
                                    {"roi_id", r.roi_id},
                                    {"origin", {r.origin_x, r.origin_y}},
                                    {"background", r.background},
                                    {"domain", std::string(to_string(r.domain))},
                                    {"annotation_count", r.annotation_count}};
  return j.dump();
}

TileRecord tile_record_from_json(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    TileRecord r;
    r.tile_id = j.at("tile_id").get<std::string>();
    r.roi_id = j.at("roi_id").get<std::string>();
    const auto origin = j.at("origin").get<std::vector<int>>();
    if (origin.size() != 2) throw InputError("tile record origin needs 2 numbers");
    r.origin_x = origin[0];
    r.origin_y = origin[1];
    r.background = j.at("background").get<bool>();
    r.domain = parse_domain(j.at("domain").get<std::string>());
    r.annotation_count = j.at("annotation_count").get<std::size_t>();
    if (r.background != (r.annotation_count == 0)) {
      throw InputError("tile record '" + r.tile_id +
                       "': background must hold exactly when annotation_count is 0");
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed tile record: ") + e.what());
  }
}

}  // namespace mitodet
