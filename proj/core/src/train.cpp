#include "apanet/train.hpp"

#include "apanet/eval.hpp"
#include "apanet/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <thread>

namespace apanet {

double TrainConfig::learning_rate(int epoch_1based) const {
  return lr0 * std::exp(-lr_decay * (epoch_1based - 1));
}

namespace {

double squared_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).squaredNorm();
}

}  // namespace

TripletLossResult triplet_loss(const Descriptor& query,
                               const std::vector<Descriptor>& positives,
                               const std::vector<Descriptor>& negatives,
                               double margin) {
  if (positives.empty() || negatives.empty())
    throw std::invalid_argument("triplet_loss: empty positive or negative list");
  TripletLossResult res;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const double d2 = squared_distance(query.values, positives[i].values);
    if (d2 < best) {
      best = d2;
      res.best_positive = static_cast<int>(i);
    }
  }
  for (std::size_t j = 0; j < negatives.size(); ++j) {
    const double hinge =
        best + margin - squared_distance(query.values, negatives[j].values);
    if (hinge > 0.0) {
      res.loss += hinge;
      res.active_negatives.push_back(static_cast<int>(j));
    }
  }
  return res;
}

TripletGrads triplet_loss_gradients(const Descriptor& query,
                                    const std::vector<Descriptor>& positives,
                                    const std::vector<Descriptor>& negatives,
                                    const TripletLossResult& result) {
  const Eigen::Index d = query.values.size();
  TripletGrads g;
  g.d_query = Eigen::VectorXd::Zero(d);
  g.d_best_positive = Eigen::VectorXd::Zero(d);
  g.d_negatives.assign(negatives.size(), Eigen::VectorXd::Zero(d));
  const Eigen::VectorXd& p = positives[result.best_positive].values;
  for (int j : result.active_negatives) {
    const Eigen::VectorXd& n = negatives[j].values;
    g.d_query += 2.0 * (n - p);
    g.d_best_positive += 2.0 * (p - query.values);
    g.d_negatives[j] = 2.0 * (query.values - n);
  }
  return g;
}

std::vector<TrainingTuple> mine_tuples(
    const std::vector<GeoImageRecord>& records,
    const Eigen::MatrixXd& descriptors, Rng& rng, const TrainConfig& cfg) {
  if (records.size() != static_cast<std::size_t>(descriptors.rows()))
    throw std::invalid_argument("mine_tuples: descriptor/record count mismatch");

  std::vector<int> database_indices;
  std::vector<int> query_indices;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].role == Role::database)
      database_indices.push_back(static_cast<int>(i));
    else
      query_indices.push_back(static_cast<int>(i));
  }

  std::vector<TrainingTuple> tuples;
  for (int q : query_indices) {
    TrainingTuple tuple;
    tuple.query = records[q];
    tuple.query_index = q;

    std::vector<int> far;
    for (int db : database_indices) {
      const double dist = geo_distance(records[q], records[db]);
      if (dist <= cfg.r_pos) {
        tuple.potential_positives.push_back(records[db]);
        tuple.positive_indices.push_back(db);
      } else if (dist > cfg.r_neg) {
        far.push_back(db);
      }
    }
    if (tuple.potential_positives.empty()) {
      std::cerr << "warning: query " << records[q].id
                << " has no geographic positive, skipping\n";
      continue;
    }
    if (far.empty()) continue;

    // Random candidate pool, then rank by descriptor distance.
    std::vector<int> pool = far;
    rng.shuffle(pool);
    if (pool.size() > static_cast<std::size_t>(cfg.neg_sample))
      pool.resize(cfg.neg_sample);
    std::sort(pool.begin(), pool.end(), [&](int a, int b) {
      const double da =
          (descriptors.row(a) - descriptors.row(q)).squaredNorm();
      const double db =
          (descriptors.row(b) - descriptors.row(q)).squaredNorm();
      if (da != db) return da < db;
      return records[a].id < records[b].id;
    });
    const std::size_t keep =
        std::min<std::size_t>(cfg.hard_k, pool.size());
    for (std::size_t j = 0; j < keep; ++j) {
      tuple.negatives.push_back(records[pool[j]]);
      tuple.negative_indices.push_back(pool[j]);
    }
    if (!tuple.negatives.empty()) tuples.push_back(std::move(tuple));
  }
  return tuples;
}

TupleGradients tuple_gradients(const FeatureMap& query_map,
                               const std::vector<FeatureMap>& positive_maps,
                               const std::vector<FeatureMap>& negative_maps,
                               const HeadParams& params,
                               const std::vector<int>& scales, double margin) {
  ApanetForwardState query_state =
      apanet_forward_cached(query_map, params, scales);
  std::vector<ApanetForwardState> pos_states;
  pos_states.reserve(positive_maps.size());
  std::vector<Descriptor> pos_descs;
  for (const auto& fm : positive_maps) {
    pos_states.push_back(apanet_forward_cached(fm, params, scales));
    pos_descs.push_back(pos_states.back().output);
  }
  std::vector<ApanetForwardState> neg_states;
  neg_states.reserve(negative_maps.size());
  std::vector<Descriptor> neg_descs;
  for (const auto& fm : negative_maps) {
    neg_states.push_back(apanet_forward_cached(fm, params, scales));
    neg_descs.push_back(neg_states.back().output);
  }

  TripletLossResult loss =
      triplet_loss(query_state.output, pos_descs, neg_descs, margin);

  TupleGradients out;
  out.loss = loss.loss;
  out.grads = HeadGrads::zeros_like(params);
  if (loss.active_negatives.empty() || !params.trainable()) return out;

  TripletGrads tg =
      triplet_loss_gradients(query_state.output, pos_descs, neg_descs, loss);
  out.grads.accumulate(apanet_vjp(tg.d_query, query_state, params).params);
  out.grads.accumulate(
      apanet_vjp(tg.d_best_positive, pos_states[loss.best_positive], params)
          .params);
  for (int j : loss.active_negatives)
    out.grads.accumulate(
        apanet_vjp(tg.d_negatives[j], neg_states[j], params).params);
  return out;
}

SgdState SgdState::zeros_like(const HeadParams& params) {
  SgdState s;
  s.velocity = HeadGrads::zeros_like(params);
  return s;
}

void sgd_step(HeadParams& params, const HeadGrads& grads, SgdState& state,
              double lr, const TrainConfig& cfg) {
  if (!params.trainable()) return;
  const double lr_eff = lr * cfg.attention_lr_multiplier;
  auto update = [&](auto& p, const auto& g, auto& v) {
    v = cfg.momentum * v + (g + cfg.weight_decay * p);
    p -= lr_eff * v;
  };
  update(params.v0, grads.v0, state.velocity.v0);
  if (params.mode == AttentionMode::cascaded) {
    update(params.fc_weight, grads.fc_weight, state.velocity.fc_weight);
    update(params.fc_bias, grads.fc_bias, state.velocity.fc_bias);
  }
}

TrainData load_train_data(const std::filesystem::path& manifest_path) {
  TrainData data;
  data.records = read_manifest(manifest_path);
  data.maps.reserve(data.records.size());
  for (const auto& rec : data.records)
    data.maps.push_back(
        read_feature_map(resolve_map_path(manifest_path, rec.featuremap_path)));
  return data;
}

Eigen::MatrixXd extract_descriptor_rows(const std::vector<FeatureMap>& maps,
                                        const HeadParams& params,
                                        const std::vector<int>& scales,
                                        int threads) {
  if (maps.empty()) return {};
  const int dim = maps.front().depth;
  Eigen::MatrixXd rows(maps.size(), dim);
  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      rows.row(i) = apanet_forward(maps[i], params, scales).values.transpose();
  };
  if (threads <= 1 || maps.size() < 2) {
    worker(0, maps.size());
  } else {
    const std::size_t n_workers = std::min<std::size_t>(threads, maps.size());
    const std::size_t chunk = (maps.size() + n_workers - 1) / n_workers;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(maps.size(), begin + chunk);
      if (begin < end) pool.emplace_back(worker, begin, end);
    }
    for (auto& t : pool) t.join();
  }
  return rows;
}

TrainResult train_epochs(
    const TrainData& data, const TrainConfig& cfg,
    const std::optional<std::filesystem::path>& checkpoint_dir) {
  if (cfg.margin <= 0.0)
    throw std::invalid_argument("train_epochs: margin must be > 0");
  if (cfg.lr0 <= 0.0 || cfg.momentum < 0.0 || cfg.weight_decay < 0.0 ||
      cfg.batch_tuples < 1 || cfg.epochs < 0)
    throw std::invalid_argument("train_epochs: invalid config");
  if (data.records.empty())
    throw std::invalid_argument("train_epochs: empty training data");

  const int dim = data.maps.front().depth;
  Rng rng(cfg.seed);
  TrainResult result;
  result.params = init_head_params(cfg.mode, dim, rng);
  SgdState sgd = SgdState::zeros_like(result.params);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate(epoch);
    Eigen::MatrixXd descriptors =
        extract_descriptor_rows(data.maps, result.params, cfg.scales);
    std::vector<TrainingTuple> tuples =
        mine_tuples(data.records, descriptors, rng, cfg);
    rng.shuffle(tuples);

    double epoch_loss = 0.0;
    int counted = 0;
    std::size_t t = 0;
    while (t < tuples.size()) {
      const std::size_t batch_end =
          std::min(tuples.size(), t + static_cast<std::size_t>(cfg.batch_tuples));
      HeadGrads batch = HeadGrads::zeros_like(result.params);
      const double inv = 1.0 / static_cast<double>(batch_end - t);
      for (; t < batch_end; ++t) {
        const TrainingTuple& tuple = tuples[t];
        std::vector<FeatureMap> pos_maps, neg_maps;
        for (int i : tuple.positive_indices) pos_maps.push_back(data.maps[i]);
        for (int i : tuple.negative_indices) neg_maps.push_back(data.maps[i]);
        TupleGradients tg =
            tuple_gradients(data.maps[tuple.query_index], pos_maps, neg_maps,
                            result.params, cfg.scales, cfg.margin);
        if (!std::isfinite(tg.loss)) {
          std::cerr << "train_epochs: non-finite loss at epoch " << epoch
                    << " query " << tuple.query.id << "\n"
                    << "  lr=" << lr << " |v0|="
                    << (result.params.v0.size() ? result.params.v0.norm() : 0.0)
                    << "\n";
          throw std::runtime_error("train_epochs: non-finite loss");
        }
        epoch_loss += tg.loss;
        ++counted;
        batch.accumulate(tg.grads, inv);
      }
      sgd_step(result.params, batch, sgd, lr, cfg);
    }
    result.loss_history.push_back(counted > 0 ? epoch_loss / counted : 0.0);

    if (checkpoint_dir) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_epoch_%03d.json", epoch);
      save_head_params(*checkpoint_dir / name, result.params);
    }
  }
  return result;
}

void save_head_params(const std::filesystem::path& json_path,
                      const HeadParams& params) {
  std::filesystem::path matrix_path = json_path;
  matrix_path.replace_extension(".apad");

  const int dim = params.dim();
  int rows = 0;
  if (params.mode == AttentionMode::single) rows = 1;
  if (params.mode == AttentionMode::cascaded) rows = 2 + dim;
  Eigen::MatrixXd m(rows, dim);
  if (params.mode != AttentionMode::none) m.row(0) = params.v0.transpose();
  if (params.mode == AttentionMode::cascaded) {
    m.row(1) = params.fc_bias.transpose();
    m.bottomRows(dim) = params.fc_weight;
  }
  write_descriptor_matrix(matrix_path, m);

  nlohmann::json j;
  j["mode"] = to_string(params.mode);
  j["dim"] = dim;
  j["matrix"] = matrix_path.filename().string();
  std::ofstream out(json_path);
  if (!out) throw IoError("cannot open for writing: " + json_path.string());
  out << j.dump(2) << "\n";
}

HeadParams load_head_params(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw IoError("cannot open params: " + json_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("params file is not valid JSON: " + json_path.string() +
                      ": " + e.what());
  }
  HeadParams params;
  params.mode = attention_mode_from_string(j.at("mode").get<std::string>());
  const int dim = j.at("dim").get<int>();
  if (params.mode == AttentionMode::none) return params;

  const auto matrix_path =
      json_path.parent_path() / j.at("matrix").get<std::string>();
  Eigen::MatrixXd m = read_descriptor_matrix(matrix_path);
  const int expected_rows =
      params.mode == AttentionMode::single ? 1 : 2 + dim;
  if (m.rows() != expected_rows || m.cols() != dim)
    throw FormatError("params matrix shape mismatch in " +
                      matrix_path.string());
  params.v0 = m.row(0).transpose();
  if (params.mode == AttentionMode::cascaded) {
    params.fc_bias = m.row(1).transpose();
    params.fc_weight = m.bottomRows(dim);
  }
  return params;
}

}  // namespace apanet
