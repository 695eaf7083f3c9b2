#pragma once

#include "apanet/attention.hpp"
#include "apanet/pyramid.hpp"
#include "apanet/types.hpp"

#include <optional>
#include <vector>

namespace apanet {

inline const std::vector<int> kDefaultScales = {2, 4, 6, 8};

// F0 = sum of all regional features.
Descriptor sum_pool(const RegionalFeatureSet& rfs);

// Per-channel max over all spatial cells, then L2 normalization.
Descriptor mac_pool(const FeatureMap& fm);

// Per-channel sum over all spatial cells, then L2 normalization.
Descriptor global_sum_pool(const FeatureMap& fm);

// Full head: pyramid pooling -> attention per params.mode -> sum ->
// L2 normalization. skip_final_norm leaves the raw aggregate for
// pipelines that whiten and normalize afterward.
struct ApanetForwardState {
  PoolResult pool;
  std::optional<AttentionResult> attention;  // absent in mode none
  Eigen::VectorXd pre_norm;
  Descriptor output;
  bool skip_final_norm = false;
};

ApanetForwardState apanet_forward_cached(const FeatureMap& fm,
                                         const HeadParams& params,
                                         const std::vector<int>& scales,
                                         bool skip_final_norm = false);

Descriptor apanet_forward(const FeatureMap& fm, const HeadParams& params,
                          const std::vector<int>& scales,
                          bool skip_final_norm = false);

struct ApanetGrads {
  FeatureMap input;  // dL/d(feature map)
  HeadGrads params;
};

// End-to-end VJP through final normalization, attention and pooling.
ApanetGrads apanet_vjp(const Eigen::VectorXd& upstream,
                       const ApanetForwardState& state,
                       const HeadParams& params);

}  // namespace apanet
