#include "apanet/pyramid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace apanet {
namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace

int region_count(const std::vector<int>& scales) {
  if (scales.empty())
    throw std::invalid_argument("region_count: empty scale list");
  int total = 0;
  for (int s : scales) {
    if (s < 1) throw std::invalid_argument("region_count: scale must be >= 1");
    total += s * s;
  }
  return total;
}

GridSpec grid_spec(int scale, int width, int height) {
  if (scale < 1 || width < 1 || height < 1)
    throw std::invalid_argument("grid_spec: arguments must be >= 1");
  GridSpec g;
  g.scale = scale;
  g.window_w = ceil_div(2 * width, scale + 1);
  g.window_h = ceil_div(2 * height, scale + 1);
  g.stride_w = ceil_div(width, scale + 1);
  g.stride_h = ceil_div(height, scale + 1);
  g.origins.reserve(static_cast<std::size_t>(scale) * scale);
  for (int i = 0; i < scale; ++i)
    for (int j = 0; j < scale; ++j)
      g.origins.push_back({i * g.stride_h, j * g.stride_w});
  return g;
}

bool grid_fits(const GridSpec& grid, int width, int height) {
  for (const auto& o : grid.origins)
    if (o.row >= height || o.col >= width) return false;
  return true;
}

PoolResult pyramid_pool_forward(const FeatureMap& fm,
                                const std::vector<int>& scales) {
  if (!fm.all_finite())
    throw std::invalid_argument("pyramid_pool_forward: non-finite input");
  const int n_regions = region_count(scales);
  const int depth = fm.depth;

  PoolResult out;
  out.regions.scales = scales;
  out.regions.features.resize(n_regions, depth);
  out.argmax.resize(n_regions, depth);
  out.width = fm.width;
  out.height = fm.height;

  int row = 0;
  for (int s : scales) {
    const GridSpec grid = grid_spec(s, fm.width, fm.height);
    if (!grid_fits(grid, fm.width, fm.height))
      throw std::invalid_argument(
          "pyramid_pool_forward: scale " + std::to_string(s) +
          " produces an empty window on a " + std::to_string(fm.width) + "x" +
          std::to_string(fm.height) + " map");
    for (const auto& origin : grid.origins) {
      const int y1 = std::min(origin.row + grid.window_h, fm.height);
      const int x1 = std::min(origin.col + grid.window_w, fm.width);
      for (int c = 0; c < depth; ++c) {
        double best = -std::numeric_limits<double>::infinity();
        int best_idx = -1;
        // Scan in canonical layout order so ties pick the first cell.
        for (int y = origin.row; y < y1; ++y) {
          for (int x = origin.col; x < x1; ++x) {
            const double v = fm.at(y, x, c);
            if (v > best) {
              best = v;
              best_idx = fm.spatial_index(y, x);
            }
          }
        }
        out.regions.features(row, c) = best;
        out.argmax(row, c) = best_idx;
      }
      ++row;
    }
  }
  return out;
}

FeatureMap pyramid_pool_vjp(const Eigen::MatrixXd& upstream,
                            const ArgmaxIndex& argmax, int width, int height,
                            int depth) {
  if (upstream.rows() != argmax.rows() || upstream.cols() != argmax.cols() ||
      upstream.cols() != depth)
    throw std::invalid_argument("pyramid_pool_vjp: shape mismatch");
  FeatureMap grad(width, height, depth, 0.0);
  const int n_cells = width * height;
  for (Eigen::Index r = 0; r < upstream.rows(); ++r) {
    for (int c = 0; c < depth; ++c) {
      const int idx = argmax(r, c);
      if (idx < 0 || idx >= n_cells)
        throw std::invalid_argument("pyramid_pool_vjp: argmax out of range");
      grad.data[static_cast<std::size_t>(idx) * depth + c] += upstream(r, c);
    }
  }
  return grad;
}

RegionalFeatureSet apply_snw(const RegionalFeatureSet& rfs,
                             const WhiteningModel& model) {
  if (rfs.depth() != model.dim)
    throw std::invalid_argument("apply_snw: dimension mismatch");
  RegionalFeatureSet out;
  out.scales = rfs.scales;
  out.features.resize(rfs.features.rows(), model.out_dim);
  for (Eigen::Index i = 0; i < rfs.features.rows(); ++i) {
    Descriptor normalized = l2_normalize(rfs.features.row(i).transpose());
    Eigen::VectorXd whitened =
        power_whiten_raw(normalized.values, model, 1.0).head(model.out_dim);
    out.features.row(i) = l2_normalize(whitened).values.transpose();
  }
  return out;
}

std::vector<int> parse_scales(const std::string& csv) {
  std::vector<int> scales;
  const char* p = csv.data();
  const char* end = p + csv.size();
  while (p < end) {
    int value = 0;
    auto [next, ec] = std::from_chars(p, end, value);
    if (ec != std::errc() || value < 1)
      throw std::invalid_argument("invalid scale list: " + csv);
    scales.push_back(value);
    p = next;
    if (p < end) {
      if (*p != ',') throw std::invalid_argument("invalid scale list: " + csv);
      ++p;
    }
  }
  if (scales.empty()) throw std::invalid_argument("empty scale list");
  return scales;
}

}  // namespace apanet
