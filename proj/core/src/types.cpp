#include "apanet/types.hpp"

#include <cmath>

namespace apanet {

bool FeatureMap::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

int RegionalFeatureSet::scale_row_offset(int scale_index) const {
  int off = 0;
  for (int j = 0; j < scale_index; ++j) off += scales[j] * scales[j];
  return off;
}

Role role_from_string(const std::string& s) {
  if (s == "database") return Role::database;
  if (s == "query") return Role::query;
  throw std::invalid_argument("unknown role: " + s);
}

std::string to_string(Role r) {
  return r == Role::database ? "database" : "query";
}

Descriptor l2_normalize(const Eigen::VectorXd& v) {
  if (!v.allFinite())
    throw std::invalid_argument("l2_normalize: non-finite input");
  Descriptor out;
  const double norm = v.norm();
  if (norm < kDegenerateNormEps) {
    out.values = v;
    out.degenerate = true;
    return out;
  }
  out.values = v / norm;
  return out;
}

bool l2_normalize_row(Eigen::Ref<Eigen::RowVectorXd> row) {
  const double norm = row.norm();
  if (norm < kDegenerateNormEps) return false;
  row /= norm;
  return true;
}

}  // namespace apanet
