#pragma once

#include "apanet/types.hpp"
#include "apanet/whitening.hpp"

#include <vector>

namespace apanet {

// One pooling grid: n x n windows whose size and stride follow the
// ceiling formulas
//   window = ceil(2W/(n+1)) x ceil(2H/(n+1))
//   stride = ceil(W/(n+1)) x ceil(H/(n+1))
// giving roughly 50% overlap on each side. Windows that extend past the
// map edge are clamped to it.
struct GridSpec {
  int scale = 0;
  int window_w = 0, window_h = 0;
  int stride_w = 0, stride_h = 0;
  struct Origin {
    int row, col;
  };
  std::vector<Origin> origins;  // n*n entries, grid cells in row-major order
};

// Total number of regions for a scale list: sum of s_j^2.
int region_count(const std::vector<int>& scales);

GridSpec grid_spec(int scale, int width, int height);

// True when every clamped window of the grid is non-empty on a
// width x height map.
bool grid_fits(const GridSpec& grid, int width, int height);

// Flat spatial index (y * W + x) of the selected maximum for every
// (region, channel); first occurrence in canonical layout order on ties.
using ArgmaxIndex = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

struct PoolResult {
  RegionalFeatureSet regions;
  ArgmaxIndex argmax;
  int width = 0;   // input map shape, needed by the backward pass
  int height = 0;
};

// Per-channel max over each pyramid window, regions ordered by scale
// then grid cell (row-major). Throws when a clamped window is empty.
PoolResult pyramid_pool_forward(const FeatureMap& fm,
                                const std::vector<int>& scales);

// Routes each upstream gradient entry to its recorded argmax cell,
// accumulating across overlapping regions.
FeatureMap pyramid_pool_vjp(const Eigen::MatrixXd& upstream,
                            const ArgmaxIndex& argmax, int width, int height,
                            int depth);

// Shift, normalization and whitening on each regional feature:
// L2-normalize, PCA-whiten with the model (alpha = 1), L2-normalize
// again.
RegionalFeatureSet apply_snw(const RegionalFeatureSet& rfs,
                             const WhiteningModel& model);

std::vector<int> parse_scales(const std::string& csv);

}  // namespace apanet
