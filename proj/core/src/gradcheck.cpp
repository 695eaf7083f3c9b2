#include "apanet/gradcheck.hpp"

#include "apanet/aggregate.hpp"
#include "apanet/train.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace apanet {
namespace {

double rel_err(double analytic, double fd) {
  return std::abs(analytic - fd) /
         std::max({std::abs(analytic), std::abs(fd), 1e-3});
}

// Central difference of a scalar probe at one coordinate.
double central_diff(const std::function<double()>& probe, double& coord) {
  const double saved = coord;
  coord = saved + kGradCheckStep;
  const double hi = probe();
  coord = saved - kGradCheckStep;
  const double lo = probe();
  coord = saved;
  return (hi - lo) / (2.0 * kGradCheckStep);
}

// Map whose per-channel values have pairwise gaps far above the FD
// step, so the argmax cannot flip under perturbation.
FeatureMap tie_free_map(int w, int h, int d, Rng& rng) {
  FeatureMap fm(w, h, d);
  const int cells = w * h;
  std::vector<int> perm(cells);
  for (int c = 0; c < d; ++c) {
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    for (int i = 0; i < cells; ++i) {
      const double jitter = rng.uniform(-0.4, 0.4);
      fm.data[static_cast<std::size_t>(i) * d + c] =
          (perm[i] + 0.5 + jitter) / cells;
    }
  }
  return fm;
}

Eigen::VectorXd random_vector(int d, Rng& rng) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = rng.normal();
  return v;
}

Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

// Regional features with row norms bounded away from zero, so the
// in-score normalization stays smooth under the FD step.
RegionalFeatureSet random_regions(int n, int d, Rng& rng) {
  RegionalFeatureSet rfs;  // synthetic set, not produced by a pyramid
  rfs.features = random_matrix(n, d, rng);
  for (int i = 0; i < n; ++i) {
    const double target = rng.uniform(0.5, 2.0);
    rfs.features.row(i) *= target / rfs.features.row(i).norm();
  }
  return rfs;
}

HeadParams random_params(AttentionMode mode, int d, Rng& rng) {
  HeadParams p;
  p.mode = mode;
  if (mode == AttentionMode::none) return p;
  p.v0 = random_vector(d, rng) / std::sqrt(static_cast<double>(d));
  if (mode == AttentionMode::cascaded) {
    p.fc_weight = random_matrix(d, d, rng) / std::sqrt(static_cast<double>(d));
    p.fc_bias = random_vector(d, rng) * 0.1;
  }
  return p;
}

}  // namespace

double gradcheck_pyramid(Rng& rng) {
  const std::vector<int> scales = {1, 2, 3};
  const int w = rng.uniform_int(3, 9);
  const int h = rng.uniform_int(3, 9);
  const int d = rng.uniform_int(2, 4);
  FeatureMap fm = tie_free_map(w, h, d, rng);
  const int n = region_count(scales);
  Eigen::MatrixXd probe_w = random_matrix(n, d, rng);

  auto probe = [&]() {
    PoolResult res = pyramid_pool_forward(fm, scales);
    return (probe_w.array() * res.regions.features.array()).sum();
  };

  PoolResult res = pyramid_pool_forward(fm, scales);
  FeatureMap analytic = pyramid_pool_vjp(probe_w, res.argmax, w, h, d);

  double worst = 0.0;
  for (std::size_t i = 0; i < fm.data.size(); ++i) {
    const double fd = central_diff(probe, fm.data[i]);
    worst = std::max(worst, rel_err(analytic.data[i], fd));
  }
  return worst;
}

double gradcheck_single_attention(Rng& rng) {
  const int n = rng.uniform_int(2, 8);
  const int d = rng.uniform_int(2, 5);
  RegionalFeatureSet rfs = random_regions(n, d, rng);
  Eigen::VectorXd v0 = random_vector(d, rng);
  Eigen::VectorXd probe_w = random_vector(d, rng);

  auto probe = [&]() {
    return probe_w.dot(single_attention_forward(rfs, v0).descriptor.values);
  };

  HeadParams params;
  params.mode = AttentionMode::single;
  params.v0 = v0;
  AttentionResult fwd = single_attention_forward(rfs, v0);
  AttentionGrads analytic = attention_vjp(probe_w, fwd.cache, params);

  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      const double fd = central_diff(probe, rfs.features(i, j));
      worst = std::max(worst, rel_err(analytic.input(i, j), fd));
    }
  for (int j = 0; j < d; ++j) {
    const double fd = central_diff(probe, v0(j));
    worst = std::max(worst, rel_err(analytic.params.v0(j), fd));
  }
  return worst;
}

double gradcheck_cascaded_attention(Rng& rng) {
  const int n = rng.uniform_int(2, 8);
  const int d = rng.uniform_int(2, 5);
  RegionalFeatureSet rfs = random_regions(n, d, rng);
  HeadParams params = random_params(AttentionMode::cascaded, d, rng);
  Eigen::VectorXd probe_w = random_vector(d, rng);

  auto probe = [&]() {
    return probe_w.dot(
        cascaded_attention_forward(rfs, params).descriptor.values);
  };

  AttentionResult fwd = cascaded_attention_forward(rfs, params);
  AttentionGrads analytic = attention_vjp(probe_w, fwd.cache, params);

  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      const double fd = central_diff(probe, rfs.features(i, j));
      worst = std::max(worst, rel_err(analytic.input(i, j), fd));
    }
  for (int j = 0; j < d; ++j) {
    const double fd = central_diff(probe, params.v0(j));
    worst = std::max(worst, rel_err(analytic.params.v0(j), fd));
  }
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const double fd = central_diff(probe, params.fc_weight(i, j));
      worst = std::max(worst, rel_err(analytic.params.fc_weight(i, j), fd));
    }
  for (int j = 0; j < d; ++j) {
    const double fd = central_diff(probe, params.fc_bias(j));
    worst = std::max(worst, rel_err(analytic.params.fc_bias(j), fd));
  }
  return worst;
}

double gradcheck_apanet(const std::string& mode, Rng& rng) {
  const AttentionMode m = attention_mode_from_string(mode);
  const std::vector<int> scales = {1, 2, 3};
  const int w = rng.uniform_int(3, 9);
  const int h = rng.uniform_int(3, 9);
  const int d = rng.uniform_int(2, 4);
  FeatureMap fm = tie_free_map(w, h, d, rng);
  HeadParams params = random_params(m, d, rng);
  Eigen::VectorXd probe_w = random_vector(d, rng);

  auto probe = [&]() {
    return probe_w.dot(apanet_forward(fm, params, scales).values);
  };

  ApanetForwardState state = apanet_forward_cached(fm, params, scales);
  ApanetGrads analytic = apanet_vjp(probe_w, state, params);

  double worst = 0.0;
  for (std::size_t i = 0; i < fm.data.size(); ++i) {
    const double fd = central_diff(probe, fm.data[i]);
    worst = std::max(worst, rel_err(analytic.input.data[i], fd));
  }
  if (m != AttentionMode::none) {
    for (int j = 0; j < d; ++j) {
      const double fd = central_diff(probe, params.v0(j));
      worst = std::max(worst, rel_err(analytic.params.v0(j), fd));
    }
  }
  if (m == AttentionMode::cascaded) {
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const double fd = central_diff(probe, params.fc_weight(i, j));
        worst = std::max(worst, rel_err(analytic.params.fc_weight(i, j), fd));
      }
    for (int j = 0; j < d; ++j) {
      const double fd = central_diff(probe, params.fc_bias(j));
      worst = std::max(worst, rel_err(analytic.params.fc_bias(j), fd));
    }
  }
  return worst;
}

double gradcheck_triplet(Rng& rng) {
  const int d = rng.uniform_int(3, 6);
  const double margin = 0.1;

  // Regenerate until no hinge sits near zero and the best positive is
  // unique: the loss is smooth there.
  for (int attempt = 0; attempt < 100; ++attempt) {
    Descriptor q = l2_normalize(random_vector(d, rng));
    std::vector<Descriptor> pos, neg;
    for (int i = 0; i < 3; ++i)
      pos.push_back(l2_normalize(random_vector(d, rng)));
    for (int j = 0; j < 4; ++j)
      neg.push_back(l2_normalize(random_vector(d, rng)));

    std::vector<double> pos_d2;
    for (const auto& p : pos)
      pos_d2.push_back((q.values - p.values).squaredNorm());
    std::vector<double> sorted = pos_d2;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.size() > 1 && sorted[1] - sorted[0] < 1e-3) continue;
    const double best = sorted[0];
    bool near_zero_hinge = false;
    bool any_active = false;
    for (const auto& n : neg) {
      const double hinge =
          best + margin - (q.values - n.values).squaredNorm();
      if (std::abs(hinge) < 1e-3) near_zero_hinge = true;
      if (hinge > 0.0) any_active = true;
    }
    if (near_zero_hinge || !any_active) continue;

    TripletLossResult res = triplet_loss(q, pos, neg, margin);
    TripletGrads grads = triplet_loss_gradients(q, pos, neg, res);

    auto probe = [&]() { return triplet_loss(q, pos, neg, margin).loss; };
    double worst = 0.0;
    for (int j = 0; j < d; ++j) {
      const double fd = central_diff(probe, q.values(j));
      worst = std::max(worst, rel_err(grads.d_query(j), fd));
    }
    return worst;
  }
  throw std::runtime_error("gradcheck_triplet: no smooth instance found");
}

std::vector<GradCheckEntry> run_gradcheck_suite(std::uint64_t seed,
                                                int seeds_per_block) {
  Rng rng(seed);
  std::vector<GradCheckEntry> report;
  auto run = [&](const std::string& name, auto&& check) {
    double worst = 0.0;
    for (int s = 0; s < seeds_per_block; ++s) {
      Rng sub = rng.fork();
      worst = std::max(worst, check(sub));
    }
    report.push_back({name, worst});
  };
  run("pyramid_pool", [](Rng& r) { return gradcheck_pyramid(r); });
  run("single_attention",
      [](Rng& r) { return gradcheck_single_attention(r); });
  run("cascaded_attention",
      [](Rng& r) { return gradcheck_cascaded_attention(r); });
  run("apanet_none", [](Rng& r) { return gradcheck_apanet("none", r); });
  run("apanet_single", [](Rng& r) { return gradcheck_apanet("single", r); });
  run("apanet_cascaded",
      [](Rng& r) { return gradcheck_apanet("cascaded", r); });
  run("triplet_loss", [](Rng& r) { return gradcheck_triplet(r); });
  return report;
}

}  // namespace apanet
