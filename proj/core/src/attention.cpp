#include "apanet/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace apanet {

AttentionMode attention_mode_from_string(const std::string& s) {
  if (s == "none") return AttentionMode::none;
  if (s == "single") return AttentionMode::single;
  if (s == "cascaded") return AttentionMode::cascaded;
  throw std::invalid_argument("unknown attention mode: " + s);
}

std::string to_string(AttentionMode mode) {
  switch (mode) {
    case AttentionMode::none: return "none";
    case AttentionMode::single: return "single";
    case AttentionMode::cascaded: return "cascaded";
  }
  return "?";
}

HeadParams init_head_params(AttentionMode mode, int dim, Rng& rng) {
  if (dim < 1) throw std::invalid_argument("init_head_params: dim must be >= 1");
  HeadParams p;
  p.mode = mode;
  if (mode == AttentionMode::none) return p;
  const double v0_limit = std::sqrt(6.0 / (dim + 1));
  p.v0.resize(dim);
  for (int i = 0; i < dim; ++i) p.v0(i) = rng.uniform(-v0_limit, v0_limit);
  if (mode == AttentionMode::cascaded) {
    const double w_limit = std::sqrt(6.0 / (2.0 * dim));
    p.fc_weight.resize(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        p.fc_weight(i, j) = rng.uniform(-w_limit, w_limit);
    p.fc_bias = Eigen::VectorXd::Zero(dim);
  }
  return p;
}

namespace {

// Fills input/normalized/norms/scores1/f1 of the cache.
void stage1_forward(const RegionalFeatureSet& rfs, const Eigen::VectorXd& v0,
                    AttentionCache& cache) {
  const Eigen::Index n = rfs.features.rows();
  const Eigen::Index d = rfs.features.cols();
  if (v0.size() != d)
    throw std::invalid_argument("attention: evaluator/feature dim mismatch");
  cache.input = rfs.features;
  cache.normalized.setZero(n, d);
  cache.norms.resize(n);
  cache.scores1.resize(n);
  cache.f1 = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = rfs.features.row(i).norm();
    cache.norms(i) = norm;
    if (norm >= kDegenerateNormEps)
      cache.normalized.row(i) = rfs.features.row(i) / norm;
    cache.scores1(i) = cache.normalized.row(i).dot(v0.transpose());
    cache.f1 += cache.scores1(i) * rfs.features.row(i).transpose();
  }
}

}  // namespace

AttentionResult single_attention_forward(const RegionalFeatureSet& rfs,
                                         const Eigen::VectorXd& v0) {
  AttentionResult out;
  out.cache.mode = AttentionMode::single;
  stage1_forward(rfs, v0, out.cache);
  out.descriptor.values = out.cache.f1;
  out.descriptor.degenerate = out.cache.f1.norm() < kDegenerateNormEps;
  out.scores.stage1 = out.cache.scores1;
  return out;
}

AttentionResult cascaded_attention_forward(const RegionalFeatureSet& rfs,
                                           const HeadParams& params) {
  if (params.mode != AttentionMode::cascaded)
    throw std::invalid_argument("cascaded_attention_forward: mode mismatch");
  if (params.fc_weight.rows() != params.fc_weight.cols() ||
      params.fc_weight.rows() != params.v0.size() ||
      params.fc_bias.size() != params.v0.size())
    throw std::invalid_argument("cascaded_attention_forward: bad fc shapes");
  AttentionResult out;
  out.cache.mode = AttentionMode::cascaded;
  stage1_forward(rfs, params.v0, out.cache);

  AttentionCache& c = out.cache;
  c.preact = params.fc_weight * c.f1 + params.fc_bias;
  c.v1 = c.preact.array().tanh();
  const Eigen::Index n = c.input.rows();
  c.scores2.resize(n);
  c.f2 = Eigen::VectorXd::Zero(c.input.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    c.scores2(i) = c.normalized.row(i).dot(c.v1.transpose());
    c.f2 += c.scores2(i) * c.input.row(i).transpose();
  }
  out.descriptor.values = c.f2;
  out.descriptor.degenerate = c.f2.norm() < kDegenerateNormEps;
  out.scores.stage1 = c.scores1;
  out.scores.stage2 = c.scores2;
  return out;
}

HeadGrads HeadGrads::zeros_like(const HeadParams& params) {
  HeadGrads g;
  if (params.mode == AttentionMode::none) return g;
  g.v0 = Eigen::VectorXd::Zero(params.v0.size());
  if (params.mode == AttentionMode::cascaded) {
    g.fc_weight =
        Eigen::MatrixXd::Zero(params.fc_weight.rows(), params.fc_weight.cols());
    g.fc_bias = Eigen::VectorXd::Zero(params.fc_bias.size());
  }
  return g;
}

void HeadGrads::accumulate(const HeadGrads& other, double weight) {
  if (other.v0.size()) v0 += weight * other.v0;
  if (other.fc_weight.size()) fc_weight += weight * other.fc_weight;
  if (other.fc_bias.size()) fc_bias += weight * other.fc_bias;
}

void HeadGrads::scale(double factor) {
  if (v0.size()) v0 *= factor;
  if (fc_weight.size()) fc_weight *= factor;
  if (fc_bias.size()) fc_bias *= factor;
}

namespace {

// Backward through scores a_i = v . u_i and sum F = sum a_i f_i for one
// stage. `upstream` is dL/dF; adds dL/df_i into d_input and returns
// dL/dv. The normalization path uses J_u(f) = (I - u u^T)/||f|| and the
// identity v . u_i = a_i.
Eigen::VectorXd stage_backward(const Eigen::VectorXd& upstream,
                               const Eigen::MatrixXd& input,
                               const Eigen::MatrixXd& normalized,
                               const Eigen::VectorXd& norms,
                               const Eigen::VectorXd& scores,
                               const Eigen::VectorXd& evaluator,
                               Eigen::MatrixXd& d_input) {
  const Eigen::Index n = input.rows();
  Eigen::VectorXd d_evaluator = Eigen::VectorXd::Zero(evaluator.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = upstream.dot(input.row(i).transpose());  // dL/da_i
    d_input.row(i) += scores(i) * upstream.transpose();
    if (norms(i) >= kDegenerateNormEps) {
      d_evaluator += t * normalized.row(i).transpose();
      // through u_i = f_i/||f_i||: (v - (v.u_i) u_i)/||f_i|| * dL/da_i
      d_input.row(i) +=
          (t / norms(i)) *
          (evaluator.transpose() - scores(i) * normalized.row(i));
    }
  }
  return d_evaluator;
}

}  // namespace

AttentionGrads attention_vjp(const Eigen::VectorXd& upstream,
                             const AttentionCache& cache,
                             const HeadParams& params) {
  if (cache.input.size() == 0)
    throw std::invalid_argument("attention_vjp: missing forward cache");
  if (upstream.size() != cache.input.cols())
    throw std::invalid_argument("attention_vjp: upstream dim mismatch");

  AttentionGrads out;
  out.input = Eigen::MatrixXd::Zero(cache.input.rows(), cache.input.cols());
  out.params = HeadGrads::zeros_like(params);

  if (cache.mode == AttentionMode::single) {
    out.params.v0 = stage_backward(upstream, cache.input, cache.normalized,
                                   cache.norms, cache.scores1, params.v0,
                                   out.input);
    return out;
  }

  // Stage 2: scores a'_i = v1 . u_i, F = sum a'_i f_i.
  Eigen::VectorXd d_v1 =
      stage_backward(upstream, cache.input, cache.normalized, cache.norms,
                     cache.scores2, cache.v1, out.input);
  // v1 = tanh(W f1 + b)
  Eigen::VectorXd d_preact =
      (1.0 - cache.v1.array().square()).matrix().asDiagonal() * d_v1;
  out.params.fc_weight = d_preact * cache.f1.transpose();
  out.params.fc_bias = d_preact;
  Eigen::VectorXd d_f1 = params.fc_weight.transpose() * d_preact;
  // Stage 1 with upstream dL/df1.
  out.params.v0 = stage_backward(d_f1, cache.input, cache.normalized,
                                 cache.norms, cache.scores1, params.v0,
                                 out.input);
  return out;
}

}  // namespace apanet
