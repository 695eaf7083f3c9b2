#pragma once

#include "apanet/rng.hpp"
#include "apanet/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace apanet {

enum class AttentionMode { none, single, cascaded };

AttentionMode attention_mode_from_string(const std::string& s);
std::string to_string(AttentionMode mode);

// Trainable head parameters. v0 is the first evaluation vector (the 1x1
// conv weights); fc_weight / fc_bias exist only in cascaded mode and
// derive the second evaluation vector from the stage-1 descriptor.
struct HeadParams {
  AttentionMode mode = AttentionMode::none;
  Eigen::VectorXd v0;
  Eigen::MatrixXd fc_weight;
  Eigen::VectorXd fc_bias;

  int dim() const { return static_cast<int>(v0.size()); }
  bool trainable() const { return mode != AttentionMode::none; }
};

// Xavier/Glorot uniform init, deterministic given the rng stream.
// v0 uses fan_in = D, fan_out = 1; fc_weight uses fan_in = fan_out = D;
// fc_bias starts at zero.
HeadParams init_head_params(AttentionMode mode, int dim, Rng& rng);

// Per-region scores. Negative values are legal: no activation is applied
// to the scores. stage2 is filled only in cascaded mode.
struct AttentionScores {
  Eigen::VectorXd stage1;
  Eigen::VectorXd stage2;
};

// Cached forward state for the exact backward pass.
struct AttentionCache {
  AttentionMode mode = AttentionMode::single;
  Eigen::MatrixXd input;       // N x D regional features
  Eigen::MatrixXd normalized;  // rows u_i = f_i/||f_i|| (zero when degenerate)
  Eigen::VectorXd norms;       // ||f_i||
  Eigen::VectorXd scores1;     // a_i = v0 . u_i
  Eigen::VectorXd f1;          // stage-1 descriptor
  // cascaded only:
  Eigen::VectorXd preact;   // W f1 + b
  Eigen::VectorXd v1;       // tanh(preact)
  Eigen::VectorXd scores2;  // a'_i = v1 . u_i
  Eigen::VectorXd f2;       // stage-2 descriptor
};

struct AttentionResult {
  Descriptor descriptor;  // unnormalized sum of weighted regional features
  AttentionScores scores;
  AttentionCache cache;
};

// Stage-1 scores weight the raw regional features: the score uses the
// normalized feature, the sum uses the unnormalized one. Degenerate
// (zero-norm) rows contribute score 0.
AttentionResult single_attention_forward(const RegionalFeatureSet& rfs,
                                         const Eigen::VectorXd& v0);

// Stage 1 as above, then v1 = tanh(W f1 + b) evaluates the regions a
// second time with a content prior from the whole image.
AttentionResult cascaded_attention_forward(const RegionalFeatureSet& rfs,
                                           const HeadParams& params);

// Parameter gradients; entries unused by the mode stay empty.
struct HeadGrads {
  Eigen::VectorXd v0;
  Eigen::MatrixXd fc_weight;
  Eigen::VectorXd fc_bias;

  static HeadGrads zeros_like(const HeadParams& params);
  void accumulate(const HeadGrads& other, double weight = 1.0);
  void scale(double factor);
};

struct AttentionGrads {
  Eigen::MatrixXd input;  // N x D
  HeadGrads params;
};

// Exact gradients of the attended descriptor w.r.t. the regional
// features and all parameters, including the paths through the in-score
// normalization and tanh.
AttentionGrads attention_vjp(const Eigen::VectorXd& upstream,
                             const AttentionCache& cache,
                             const HeadParams& params);

}  // namespace apanet
