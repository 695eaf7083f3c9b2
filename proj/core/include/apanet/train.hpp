#pragma once

#include "apanet/aggregate.hpp"
#include "apanet/rng.hpp"
#include "apanet/types.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace apanet {

// One weakly supervised tuple: geographic proximity supplies potential
// positives, far-away images supply negatives.
struct TrainingTuple {
  GeoImageRecord query;
  std::vector<GeoImageRecord> potential_positives;
  std::vector<GeoImageRecord> negatives;
  // Indices into the record list the tuple was mined from.
  int query_index = -1;
  std::vector<int> positive_indices;
  std::vector<int> negative_indices;
};

struct TrainConfig {
  double margin = 0.1;
  int batch_tuples = 4;
  double lr0 = 0.001;
  double lr_decay = 0.1;  // lr_i = lr0 * exp(-lr_decay * (i - 1))
  double momentum = 0.9;
  double weight_decay = 0.001;
  double attention_lr_multiplier = 10.0;
  int epochs = 10;
  std::uint64_t seed = 42;
  AttentionMode mode = AttentionMode::cascaded;
  std::vector<int> scales = kDefaultScales;
  // Tuple mining (the NetVLAD-style recipe; radii in meters).
  double r_pos = 10.0;
  double r_neg = 25.0;
  int neg_sample = 100;
  int hard_k = 10;

  double learning_rate(int epoch_1based) const;
};

struct TripletLossResult {
  double loss = 0.0;
  int best_positive = -1;            // index of p* in the positives list
  std::vector<int> active_negatives; // hinge strictly positive
};

// Weakly supervised triplet ranking loss with squared Euclidean
// distances: p* = min_i d2(q, p_i), loss = sum_j max(0, p* + m - d2(q, n_j)).
TripletLossResult triplet_loss(const Descriptor& query,
                               const std::vector<Descriptor>& positives,
                               const std::vector<Descriptor>& negatives,
                               double margin);

// Subgradients of the loss w.r.t. the descriptors. Hinges at exactly
// zero are inactive. d_negatives is parallel to the negatives list
// (zero vectors for inactive ones).
struct TripletGrads {
  Eigen::VectorXd d_query;
  Eigen::VectorXd d_best_positive;
  std::vector<Eigen::VectorXd> d_negatives;
};
TripletGrads triplet_loss_gradients(const Descriptor& query,
                                    const std::vector<Descriptor>& positives,
                                    const std::vector<Descriptor>& negatives,
                                    const TripletLossResult& result);

// Per query: potential positives are database images within r_pos;
// negatives are the hard_k hardest (by current-descriptor distance)
// among a random sample of neg_sample database images farther than
// r_neg. Queries without any geographic positive are skipped with a
// warning.
std::vector<TrainingTuple> mine_tuples(
    const std::vector<GeoImageRecord>& records,
    const Eigen::MatrixXd& descriptors, Rng& rng, const TrainConfig& cfg);

// Loss and parameter gradients for one tuple at the current params.
struct TupleGradients {
  double loss = 0.0;
  HeadGrads grads;
};
TupleGradients tuple_gradients(const FeatureMap& query_map,
                               const std::vector<FeatureMap>& positive_maps,
                               const std::vector<FeatureMap>& negative_maps,
                               const HeadParams& params,
                               const std::vector<int>& scales, double margin);

// SGD with momentum and L2 weight decay:
//   v <- momentum * v + (g + weight_decay * p);  p <- p - lr_eff * v
// where lr_eff = lr * attention_lr_multiplier (the head's trainable
// parameters are all attention parameters).
struct SgdState {
  HeadGrads velocity;
  static SgdState zeros_like(const HeadParams& params);
};
void sgd_step(HeadParams& params, const HeadGrads& grads, SgdState& state,
              double lr, const TrainConfig& cfg);

// Manifest records plus their loaded feature maps, index-aligned.
struct TrainData {
  std::vector<GeoImageRecord> records;
  std::vector<FeatureMap> maps;
};
TrainData load_train_data(const std::filesystem::path& manifest_path);

// Descriptor matrix (one row per map) under the given params.
Eigen::MatrixXd extract_descriptor_rows(const std::vector<FeatureMap>& maps,
                                        const HeadParams& params,
                                        const std::vector<int>& scales,
                                        int threads = 1);

struct TrainResult {
  HeadParams params;
  std::vector<double> loss_history;  // mean tuple loss per epoch
  int skipped_queries = 0;           // queries without geographic positives
};

// Full training loop: per epoch re-extract descriptors, re-mine tuples,
// shuffle, batch, SGD. Deterministic given (seed, config, data).
// Writes a per-epoch checkpoint bundle when checkpoint_dir is set.
TrainResult train_epochs(
    const TrainData& data, const TrainConfig& cfg,
    const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt);

// Checkpoint bundle: JSON metadata next to an APAD matrix holding the
// parameter rows.
void save_head_params(const std::filesystem::path& json_path,
                      const HeadParams& params);
HeadParams load_head_params(const std::filesystem::path& json_path);

}  // namespace apanet
