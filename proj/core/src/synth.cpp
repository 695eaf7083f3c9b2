#include "apanet/synth.hpp"

#include "apanet/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace apanet {

void WorldConfig::validate() const {
  if (num_places < 1 || database_views_per_place < 1 ||
      query_views_per_place < 0)
    throw std::invalid_argument("WorldConfig: need places and database views");
  if (width < 1 || height < 1 || depth < 1)
    throw std::invalid_argument("WorldConfig: map dimensions must be >= 1");
  if (num_signal_channels < 1 || num_clutter_channels < 0 ||
      num_signal_channels + num_clutter_channels > depth)
    throw std::invalid_argument(
        "WorldConfig: channel partitions must be disjoint and fit in depth");
  if (clutter_rate < 0.0 || clutter_rate > 1.0 || burst_repeat_rate < 0.0 ||
      burst_repeat_rate > 1.0)
    throw std::invalid_argument("WorldConfig: rates must lie in [0, 1]");
  if (shift_cells < 0 || gain_jitter < 0.0 || gain_jitter >= 1.0)
    throw std::invalid_argument("WorldConfig: bad perturbation magnitudes");
  if (extent_meters <= 0.0)
    throw std::invalid_argument("WorldConfig: extent must be positive");
  // Signal block (up to 5x5) plus shift slack must fit the map.
  const int max_block = 5;
  if (width < max_block + 2 * shift_cells || height < max_block + 2 * shift_cells)
    throw std::invalid_argument(
        "WorldConfig: map too small for signal block plus shift slack");
}

namespace {

struct PlacePattern {
  double cx, cy;             // geo center
  int block_h, block_w;      // signal block extent in cells
  int anchor_y, anchor_x;    // base block position
  std::vector<double> profile;  // block_h * block_w * num_signal values
};

// Max-combine a signal block onto the map at (y0, x0).
void paste_signal(FeatureMap& fm, const PlacePattern& p, int y0, int x0,
                  double gain, int num_signal) {
  for (int by = 0; by < p.block_h; ++by)
    for (int bx = 0; bx < p.block_w; ++bx)
      for (int c = 0; c < num_signal; ++c) {
        const double v =
            p.profile[(by * p.block_w + bx) * num_signal + c] * gain;
        double& cell = fm.at(y0 + by, x0 + bx, c);
        cell = std::max(cell, v);
      }
}

}  // namespace

std::vector<GeoImageRecord> generate_world(
    const WorldConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  Rng rng(cfg.seed);

  // Place layout on a jittered grid keeps distinct places far apart.
  const int grid = static_cast<int>(
      std::ceil(std::sqrt(static_cast<double>(cfg.num_places))));
  const double cell = cfg.extent_meters / grid;

  std::vector<PlacePattern> places(cfg.num_places);
  for (int p = 0; p < cfg.num_places; ++p) {
    PlacePattern& pat = places[p];
    const int gy = p / grid;
    const int gx = p % grid;
    pat.cx = (gx + 0.5) * cell + rng.uniform(-cell / 8.0, cell / 8.0);
    pat.cy = (gy + 0.5) * cell + rng.uniform(-cell / 8.0, cell / 8.0);
    pat.block_h = rng.uniform_int(3, 5);
    pat.block_w = rng.uniform_int(3, 5);
    pat.anchor_y =
        rng.uniform_int(cfg.shift_cells,
                        cfg.height - pat.block_h - cfg.shift_cells);
    pat.anchor_x =
        rng.uniform_int(cfg.shift_cells,
                        cfg.width - pat.block_w - cfg.shift_cells);
    pat.profile.resize(static_cast<std::size_t>(pat.block_h) * pat.block_w *
                       cfg.num_signal_channels);
    // Per-place channel signature modulated by a per-cell profile.
    std::vector<double> signature(cfg.num_signal_channels);
    for (double& s : signature) s = rng.uniform(0.3, 1.0);
    for (int by = 0; by < pat.block_h; ++by)
      for (int bx = 0; bx < pat.block_w; ++bx)
        for (int c = 0; c < cfg.num_signal_channels; ++c)
          pat.profile[(by * pat.block_w + bx) * cfg.num_signal_channels + c] =
              signature[c] * rng.uniform(0.5, 1.5);
  }

  std::filesystem::create_directories(out_dir / "maps");

  std::vector<GeoImageRecord> records;
  char idbuf[64];
  for (int p = 0; p < cfg.num_places; ++p) {
    const PlacePattern& pat = places[p];
    const int total_views =
        cfg.database_views_per_place + cfg.query_views_per_place;
    for (int v = 0; v < total_views; ++v) {
      const bool is_query = v >= cfg.database_views_per_place;
      if (is_query)
        std::snprintf(idbuf, sizeof(idbuf), "p%03d_q%02d", p,
                      v - cfg.database_views_per_place);
      else
        std::snprintf(idbuf, sizeof(idbuf), "p%03d_db%02d", p, v);

      GeoImageRecord rec;
      rec.id = idbuf;
      rec.role = is_query ? Role::query : Role::database;
      const double r = rng.uniform(0.0, kViewScatterMeters);
      const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      rec.x = pat.cx + r * std::cos(theta);
      rec.y = pat.cy + r * std::sin(theta);
      rec.featuremap_path = std::string("maps/") + rec.id + ".apaf";

      FeatureMap fm(cfg.width, cfg.height, cfg.depth, 0.0);

      // Signal pattern under viewpoint shift and illumination gain.
      const int dy = cfg.shift_cells > 0
                         ? rng.uniform_int(-cfg.shift_cells, cfg.shift_cells)
                         : 0;
      const int dx = cfg.shift_cells > 0
                         ? rng.uniform_int(-cfg.shift_cells, cfg.shift_cells)
                         : 0;
      const double gain =
          1.0 + (cfg.gain_jitter > 0.0
                     ? rng.uniform(-cfg.gain_jitter, cfg.gain_jitter)
                     : 0.0);
      paste_signal(fm, pat, pat.anchor_y + dy, pat.anchor_x + dx, gain,
                   cfg.num_signal_channels);

      // Repetitive-structure copies of the same pattern.
      for (int k = 0; k < kMaxBurstCopies; ++k) {
        if (!rng.bernoulli(cfg.burst_repeat_rate)) continue;
        const int by = rng.uniform_int(0, cfg.height - pat.block_h);
        const int bx = rng.uniform_int(0, cfg.width - pat.block_w);
        paste_signal(fm, pat, by, bx, gain * rng.uniform(0.6, 1.0),
                     cfg.num_signal_channels);
      }

      // Clutter blobs on dedicated channels, independent of place.
      if (cfg.num_clutter_channels > 0) {
        for (int k = 0; k < kMaxClutterSites; ++k) {
          if (!rng.bernoulli(cfg.clutter_rate)) continue;
          const int ch = cfg.height >= 2 ? 2 : 1;
          const int cw = cfg.width >= 2 ? 2 : 1;
          const int y0 = rng.uniform_int(0, cfg.height - ch);
          const int x0 = rng.uniform_int(0, cfg.width - cw);
          for (int by = 0; by < ch; ++by)
            for (int bx = 0; bx < cw; ++bx)
              for (int c = 0; c < cfg.num_clutter_channels; ++c) {
                double& dst =
                    fm.at(y0 + by, x0 + bx, cfg.num_signal_channels + c);
                dst = std::max(dst, rng.uniform(0.5, 1.5));
              }
        }
      }

      write_feature_map(out_dir / rec.featuremap_path, fm);
      records.push_back(std::move(rec));
    }
  }

  write_manifest(out_dir / "manifest.json", records);
  return records;
}

}  // namespace apanet
