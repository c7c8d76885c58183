#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gsvin/grid.hpp"
#include "gsvin/random.hpp"

namespace gsvin {

inline constexpr std::uint16_t kDatasetFormatVersion = 1;

struct DensityRange {
  double lo = 0.1;
  double hi = 0.3;
};

/// Everything needed to regenerate a dataset bit-for-bit.
struct DatasetManifest {
  std::uint64_t seed = 0;
  int height = 8;
  int width = 8;
  int maps = 100;
  int pairs_per_map = 6;
  DensityRange density;
  double train_fraction = 0.8;
  int retry_cap = 50;           // unreachable pair resamples before the map is regenerated
  std::string move_cost = "unit";
  bool corner_cutting = true;
  int format_version = kDatasetFormatVersion;

  /// Number of maps assigned to the training split (the rest go to test).
  int train_maps() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const DatasetManifest& m);
void from_json(const nlohmann::json& j, DatasetManifest& m);

/// One supervised example: the map (with its goal), a start cell, the first A* move and the path length.
struct PlanningSample {
  GridMap map;
  Cell agent;
  int expert_action = 0;
  std::uint32_t optimal_length = 0;
  bool operator==(const PlanningSample&) const = default;
};

/// Random obstacle map: round(rho * m * n) obstacles with rho ~ U(density), goal uniform on a free cell.
/// Throws GenerationError for m or n below 4 or a density range outside [0, 0.5].
GridMap generate_map(int height, int width, DensityRange density, Rng& rng);

/// Labels `start` with the first move of the A* path. Throws GenerationError if the goal is unreachable.
PlanningSample label_sample(const GridMap& map, Cell start);

struct Dataset {
  DatasetManifest manifest;
  std::vector<PlanningSample> train;
  std::vector<PlanningSample> test;
};

/// Generates maps independently from (seed, map index) streams; `workers` > 1 spreads maps over threads
/// without changing the output. The split is by map: the first train_maps() maps form the training set.
Dataset generate_dataset(const DatasetManifest& manifest, int workers = 1);

/// Binary file: "GWDS", u16 version, length-prefixed manifest JSON, fixed-size records, CRC-32 trailer.
std::string encode_dataset(const DatasetManifest& manifest, const std::string& split,
                           const std::vector<PlanningSample>& samples);

struct DatasetFile {
  DatasetManifest manifest;
  std::string split;
  std::vector<PlanningSample> samples;
};

DatasetFile decode_dataset(std::string_view bytes);
DatasetFile load_dataset(const std::filesystem::path& path);

/// Writes `train.gwds` and `test.gwds` into `out_dir` and returns the generated dataset.
Dataset build_dataset(const DatasetManifest& manifest, const std::filesystem::path& out_dir, int workers = 1);

/// Loads the pair written by build_dataset.
Dataset load_dataset_dir(const std::filesystem::path& dir);

}  // namespace gsvin
