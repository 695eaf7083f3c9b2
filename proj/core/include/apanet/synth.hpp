#pragma once

#include "apanet/rng.hpp"
#include "apanet/types.hpp"

#include <filesystem>
#include <vector>

namespace apanet {

// Deterministic synthetic world: each place carries a unique activation
// pattern ("building") on the signal channels, placed at a geo
// coordinate; views of the same place see the pattern under a small
// spatial shift and gain jitter (viewpoint / illumination analogs).
// Clutter patterns ("trees, cars") appear on dedicated clutter channels
// at random locations independent of place identity, and
// burst_repeat_rate tiles extra copies of the signal pattern to emulate
// repetitive structures.
struct WorldConfig {
  int num_places = 24;
  int database_views_per_place = 4;
  int query_views_per_place = 2;
  int width = 12;
  int height = 12;
  int depth = 16;
  int num_signal_channels = 8;
  int num_clutter_channels = 8;
  double clutter_rate = 0.5;       // per potential clutter site
  double burst_repeat_rate = 0.0;  // per potential extra signal copy
  int shift_cells = 1;
  double gain_jitter = 0.2;
  double extent_meters = 2000.0;
  std::uint64_t seed = 42;

  void validate() const;  // throws std::invalid_argument
};

// Fixed generator constants, part of the world definition.
inline constexpr double kViewScatterMeters = 4.0;
inline constexpr int kMaxClutterSites = 6;
inline constexpr int kMaxBurstCopies = 3;

// Writes maps/<id>.apaf files plus manifest.json into out_dir and
// returns the manifest records. Fails before writing anything when the
// config is inconsistent.
std::vector<GeoImageRecord> generate_world(const WorldConfig& cfg,
                                           const std::filesystem::path& out_dir);

}  // namespace apanet
