#include "apanet/aggregate.hpp"

#include <stdexcept>

namespace apanet {

Descriptor sum_pool(const RegionalFeatureSet& rfs) {
  if (rfs.features.rows() < 1)
    throw std::invalid_argument("sum_pool: empty regional feature set");
  Descriptor out;
  out.values = rfs.features.colwise().sum().transpose();
  out.degenerate = out.values.norm() < kDegenerateNormEps;
  return out;
}

Descriptor mac_pool(const FeatureMap& fm) {
  Eigen::VectorXd maxed(fm.depth);
  for (int c = 0; c < fm.depth; ++c) {
    double best = fm.at(0, 0, c);
    for (int y = 0; y < fm.height; ++y)
      for (int x = 0; x < fm.width; ++x) best = std::max(best, fm.at(y, x, c));
    maxed(c) = best;
  }
  return l2_normalize(maxed);
}

Descriptor global_sum_pool(const FeatureMap& fm) {
  Eigen::VectorXd summed = Eigen::VectorXd::Zero(fm.depth);
  for (int y = 0; y < fm.height; ++y)
    for (int x = 0; x < fm.width; ++x)
      for (int c = 0; c < fm.depth; ++c) summed(c) += fm.at(y, x, c);
  return l2_normalize(summed);
}

ApanetForwardState apanet_forward_cached(const FeatureMap& fm,
                                         const HeadParams& params,
                                         const std::vector<int>& scales,
                                         bool skip_final_norm) {
  ApanetForwardState state;
  state.skip_final_norm = skip_final_norm;
  state.pool = pyramid_pool_forward(fm, scales);

  switch (params.mode) {
    case AttentionMode::none:
      state.pre_norm = sum_pool(state.pool.regions).values;
      break;
    case AttentionMode::single:
      state.attention =
          single_attention_forward(state.pool.regions, params.v0);
      state.pre_norm = state.attention->descriptor.values;
      break;
    case AttentionMode::cascaded:
      state.attention =
          cascaded_attention_forward(state.pool.regions, params);
      state.pre_norm = state.attention->descriptor.values;
      break;
  }

  if (skip_final_norm) {
    state.output.values = state.pre_norm;
    state.output.degenerate = state.pre_norm.norm() < kDegenerateNormEps;
  } else {
    state.output = l2_normalize(state.pre_norm);
  }
  return state;
}

Descriptor apanet_forward(const FeatureMap& fm, const HeadParams& params,
                          const std::vector<int>& scales,
                          bool skip_final_norm) {
  return apanet_forward_cached(fm, params, scales, skip_final_norm).output;
}

ApanetGrads apanet_vjp(const Eigen::VectorXd& upstream,
                       const ApanetForwardState& state,
                       const HeadParams& params) {
  if (upstream.size() != state.pre_norm.size())
    throw std::invalid_argument("apanet_vjp: upstream dim mismatch");

  // Final normalization: y = v/||v||, dL/dv = (g - (g.y) y)/||v||.
  // Degenerate outputs pass the input through unchanged, so the
  // gradient is the identity there.
  Eigen::VectorXd d_pre;
  if (state.skip_final_norm || state.output.degenerate) {
    d_pre = upstream;
  } else {
    const double norm = state.pre_norm.norm();
    const Eigen::VectorXd& y = state.output.values;
    d_pre = (upstream - upstream.dot(y) * y) / norm;
  }

  Eigen::MatrixXd d_regions;
  ApanetGrads out;
  if (params.mode == AttentionMode::none) {
    // Sum pooling broadcasts the descriptor gradient to every region.
    d_regions = d_pre.transpose().replicate(state.pool.regions.features.rows(), 1);
    out.params = HeadGrads::zeros_like(params);
  } else {
    AttentionGrads ag = attention_vjp(d_pre, state.attention->cache, params);
    d_regions = std::move(ag.input);
    out.params = std::move(ag.params);
  }

  out.input = pyramid_pool_vjp(d_regions, state.pool.argmax, state.pool.width,
                               state.pool.height, state.pool.regions.depth());
  return out;
}

}  // namespace apanet
