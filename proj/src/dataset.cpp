#include "gsvin/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "gsvin/binio.hpp"
#include "gsvin/errors.hpp"

namespace gsvin {
namespace {

constexpr std::string_view kMagic = "GWDS";
constexpr int kMaxMapRegenerations = 1000;

Cell random_free_cell(const GridMap& map, Rng& rng) {
  const std::size_t free = map.free_count();
  std::uint64_t pick = uniform_below(rng, free);
  for (std::size_t i = 0; i < map.cells(); ++i) {
    if (map.obstacles()[i] != 0) continue;
    if (pick-- == 0) return map.cell(i);
  }
  throw GenerationError("no free cell available");
}

// Samples all pairs for one map, regenerating the map when a pair keeps failing.
std::vector<PlanningSample> generate_map_samples(const DatasetManifest& m, std::uint64_t map_index) {
  Rng rng = derive_rng(m.seed, {map_index});
  for (int attempt = 0; attempt < kMaxMapRegenerations; ++attempt) {
    GridMap map = generate_map(m.height, m.width, m.density, rng);
    std::vector<PlanningSample> samples;
    bool ok = true;
    for (int p = 0; p < m.pairs_per_map && ok; ++p) {
      ok = false;
      for (int tries = 0; tries < m.retry_cap; ++tries) {
        GridMap instance = map;
        instance.set_goal(random_free_cell(map, rng));
        Cell agent = random_free_cell(map, rng);
        if (agent == instance.goal()) continue;
        if (auto path = astar_shortest(instance, agent)) {
          samples.push_back({instance, agent, action_between(path->path[0], path->path[1]),
                             static_cast<std::uint32_t>(path->length)});
          ok = true;
          break;
        }
      }
    }
    if (ok) return samples;
  }
  throw GenerationError("could not generate a solvable map after repeated attempts");
}

void put_sample(ByteWriter& w, const PlanningSample& s) {
  const GridMap& map = s.map;
  w.u16(static_cast<std::uint16_t>(map.height()));
  w.u16(static_cast<std::uint16_t>(map.width()));
  const std::size_t bytes = (map.cells() + 7) / 8;
  std::string bitmap(bytes, '\0');
  for (std::size_t i = 0; i < map.cells(); ++i) {
    if (map.obstacles()[i] != 0) bitmap[i / 8] = static_cast<char>(bitmap[i / 8] | (1 << (i % 8)));
  }
  w.raw(bitmap);
  w.u16(static_cast<std::uint16_t>(map.goal().row));
  w.u16(static_cast<std::uint16_t>(map.goal().col));
  w.u16(static_cast<std::uint16_t>(s.agent.row));
  w.u16(static_cast<std::uint16_t>(s.agent.col));
  w.u8(static_cast<std::uint8_t>(s.expert_action));
  w.u32(s.optimal_length);
}

PlanningSample get_sample(ByteReader& r) {
  const int height = r.u16();
  const int width = r.u16();
  if (height == 0 || width == 0) throw FormatError("record with empty map");
  PlanningSample s;
  s.map = GridMap(height, width);
  const std::string_view bitmap = r.raw((s.map.cells() + 7) / 8);
  for (std::size_t i = 0; i < s.map.cells(); ++i) {
    const bool on = (static_cast<unsigned char>(bitmap[i / 8]) >> (i % 8)) & 1U;
    s.map.set_obstacle(s.map.cell(i), on);
  }
  const int goal_row = r.u16();
  const int goal_col = r.u16();
  s.map.set_goal({goal_row, goal_col});
  const int agent_row = r.u16();
  const int agent_col = r.u16();
  s.agent = {agent_row, agent_col};
  s.expert_action = r.u8();
  s.optimal_length = r.u32();
  if (!s.map.in_bounds(s.map.goal()) || !s.map.in_bounds(s.agent) || s.expert_action >= kNumActions) {
    throw FormatError("record fields out of range");
  }
  return s;
}

}  // namespace

int DatasetManifest::train_maps() const {
  return static_cast<int>(std::lround(train_fraction * static_cast<double>(maps)));
}

void DatasetManifest::validate() const {
  if (height < 4 || width < 4 || height > 65535 || width > 65535) throw ValidationError("map size must be at least 4x4");
  if (maps < 1) throw ValidationError("need at least one map");
  if (pairs_per_map < 1) throw ValidationError("need at least one pair per map");
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw ValidationError("train fraction must lie in [0,1]");
  if (retry_cap < 1) throw ValidationError("retry cap must be positive");
  if (move_cost != "unit") throw ValidationError("only unit move cost is supported");
  if (!corner_cutting) throw ValidationError("only corner cutting is supported");
  if (format_version != kDatasetFormatVersion) throw ValidationError("unsupported dataset format version");
}

void to_json(nlohmann::json& j, const DatasetManifest& m) {
  j = nlohmann::json{{"seed", m.seed},
                     {"height", m.height},
                     {"width", m.width},
                     {"maps", m.maps},
                     {"pairs_per_map", m.pairs_per_map},
                     {"density", {m.density.lo, m.density.hi}},
                     {"train_fraction", m.train_fraction},
                     {"retry_cap", m.retry_cap},
                     {"move_cost", m.move_cost},
                     {"corner_cutting", m.corner_cutting},
                     {"format_version", m.format_version}};
}

void from_json(const nlohmann::json& j, DatasetManifest& m) {
  DatasetManifest d;
  m.seed = j.value("seed", d.seed);
  m.height = j.value("height", d.height);
  m.width = j.value("width", d.width);
  m.maps = j.value("maps", d.maps);
  m.pairs_per_map = j.value("pairs_per_map", d.pairs_per_map);
  if (j.contains("density")) {
    m.density = {j.at("density").at(0).get<double>(), j.at("density").at(1).get<double>()};
  }
  m.train_fraction = j.value("train_fraction", d.train_fraction);
  m.retry_cap = j.value("retry_cap", d.retry_cap);
  m.move_cost = j.value("move_cost", d.move_cost);
  m.corner_cutting = j.value("corner_cutting", d.corner_cutting);
  m.format_version = j.value("format_version", d.format_version);
}

GridMap generate_map(int height, int width, DensityRange density, Rng& rng) {
  if (height < 4 || width < 4) throw GenerationError("maps must be at least 4x4");
  if (!(density.lo >= 0.0 && density.lo <= density.hi && density.hi <= 0.5)) {
    throw GenerationError("obstacle density range [" + std::to_string(density.lo) + ", " + std::to_string(density.hi) +
                          "] must lie within [0, 0.5]");
  }
  for (;;) {
    const double rho = density.lo + (density.hi - density.lo) * uniform_unit(rng);
    const auto cells = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    const auto obstacles = static_cast<std::size_t>(std::lround(rho * static_cast<double>(cells)));
    if (cells - obstacles < 2) continue;

    // Partial Fisher-Yates: the first `obstacles` slots become obstacles.
    std::vector<std::size_t> order(cells);
    std::iota(order.begin(), order.end(), std::size_t{0});
    GridMap map(height, width);
    for (std::size_t i = 0; i < obstacles; ++i) {
      const std::size_t j = i + uniform_below(rng, cells - i);
      std::swap(order[i], order[j]);
      map.set_obstacle(map.cell(order[i]), true);
    }
    map.set_goal(random_free_cell(map, rng));
    return map;
  }
}

PlanningSample label_sample(const GridMap& map, Cell start) {
  map.validate();
  if (!map.free(start)) throw ValidationError("start cell is not free");
  if (start == map.goal()) throw ValidationError("start cell equals the goal");
  const auto path = astar_shortest(map, start);
  if (!path) throw GenerationError("goal unreachable from start");
  return {map, start, action_between(path->path[0], path->path[1]), static_cast<std::uint32_t>(path->length)};
}

Dataset generate_dataset(const DatasetManifest& manifest, int workers) {
  manifest.validate();
  std::vector<std::vector<PlanningSample>> per_map(static_cast<std::size_t>(manifest.maps));
  const int threads = std::max(1, std::min(workers, manifest.maps));
  if (threads == 1) {
    for (int i = 0; i < manifest.maps; ++i) per_map[i] = generate_map_samples(manifest, static_cast<std::uint64_t>(i));
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    {
      std::vector<std::jthread> pool;
      for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
          try {
            for (int i = t; i < manifest.maps; i += threads) {
              per_map[i] = generate_map_samples(manifest, static_cast<std::uint64_t>(i));
            }
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  Dataset data;
  data.manifest = manifest;
  const int train_maps = manifest.train_maps();
  for (int i = 0; i < manifest.maps; ++i) {
    auto& dst = i < train_maps ? data.train : data.test;
    dst.insert(dst.end(), per_map[i].begin(), per_map[i].end());
  }
  return data;
}

std::string encode_dataset(const DatasetManifest& manifest, const std::string& split,
                           const std::vector<PlanningSample>& samples) {
  ByteWriter w;
  w.raw(kMagic);
  w.u16(kDatasetFormatVersion);
  nlohmann::json header = manifest;
  header["split"] = split;
  w.str(header.dump());
  for (const PlanningSample& s : samples) put_sample(w, s);
  w.seal();
  return w.bytes();
}

DatasetFile decode_dataset(std::string_view bytes) {
  ByteReader r(checked_payload(bytes));
  if (r.raw(4) != kMagic) throw FormatError("not a GWDS dataset file");
  const std::uint16_t version = r.u16();
  if (version != kDatasetFormatVersion) {
    throw FormatError("dataset version " + std::to_string(version) + " is not supported");
  }
  DatasetFile file;
  try {
    const auto header = nlohmann::json::parse(r.str());
    file.manifest = header.get<DatasetManifest>();
    file.split = header.value("split", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed dataset manifest: ") + e.what());
  }
  while (r.remaining() > 0) file.samples.push_back(get_sample(r));
  return file;
}

DatasetFile load_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

Dataset build_dataset(const DatasetManifest& manifest, const std::filesystem::path& out_dir, int workers) {
  Dataset data = generate_dataset(manifest, workers);
  write_file(out_dir / "train.gwds", encode_dataset(manifest, "train", data.train));
  write_file(out_dir / "test.gwds", encode_dataset(manifest, "test", data.test));
  return data;
}

Dataset load_dataset_dir(const std::filesystem::path& dir) {
  DatasetFile train = load_dataset(dir / "train.gwds");
  DatasetFile test = load_dataset(dir / "test.gwds");
  return {train.manifest, std::move(train.samples), std::move(test.samples)};
}

}  // namespace gsvin
