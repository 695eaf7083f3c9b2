#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace apanet {

// Dense W x H x D activation tensor for one image. Canonical layout is
// (H, W, D) with D fastest: data[(y * width + x) * depth + c].
struct FeatureMap {
  int width = 0;
  int height = 0;
  int depth = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(int w, int h, int d, double fill = 0.0)
      : width(w), height(h), depth(d),
        data(static_cast<std::size_t>(w) * h * d, fill) {
    if (w < 1 || h < 1 || d < 1)
      throw std::invalid_argument("FeatureMap: dimensions must be >= 1");
  }

  std::size_t size() const { return data.size(); }

  double& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * depth + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * depth + c];
  }

  // Flat spatial index, channel excluded. Used for argmax bookkeeping.
  int spatial_index(int y, int x) const { return y * width + x; }

  bool all_finite() const;
};

// N x D matrix of pooled regional features, rows grouped by scale in
// list order. N must equal the sum of squared scales.
struct RegionalFeatureSet {
  std::vector<int> scales;
  Eigen::MatrixXd features;  // N rows, D cols

  int region_count() const { return static_cast<int>(features.rows()); }
  int depth() const { return static_cast<int>(features.cols()); }

  // First row of the group belonging to scales[scale_index].
  int scale_row_offset(int scale_index) const;
};

// D-dimensional global image vector. `degenerate` marks a zero vector
// that could not be normalized.
struct Descriptor {
  Eigen::VectorXd values;
  bool degenerate = false;

  int dim() const { return static_cast<int>(values.size()); }
};

enum class Role { database, query };

Role role_from_string(const std::string& s);
std::string to_string(Role r);

// One geo-tagged image: planar coordinates in meters plus the path of
// its feature-map file.
struct GeoImageRecord {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  std::string featuremap_path;
  Role role = Role::database;
};

inline constexpr double kDegenerateNormEps = 1e-12;

// Returns v / ||v||_2. A vector with norm below kDegenerateNormEps is
// returned unchanged with the degenerate flag set. Throws on non-finite
// input.
Descriptor l2_normalize(const Eigen::VectorXd& v);

// In-place row variant used on regional feature matrices; returns false
// (and leaves the row unchanged) when the row is degenerate.
bool l2_normalize_row(Eigen::Ref<Eigen::RowVectorXd> row);

}  // namespace apanet
