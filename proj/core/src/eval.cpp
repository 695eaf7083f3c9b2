#include "apanet/eval.hpp"

#include "apanet/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>

namespace apanet {

double geo_distance(const GeoImageRecord& a, const GeoImageRecord& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

namespace {

RetrievalResult evaluate_query(const GeoImageRecord& query,
                               const std::vector<GeoImageRecord>& database,
                               const Eigen::VectorXd& query_desc,
                               const Eigen::MatrixXd& database_descriptors,
                               double radius, std::size_t max_rank) {
  const std::size_t db_size = database.size();
  std::vector<int> order(db_size);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> dist(db_size);
  for (std::size_t i = 0; i < db_size; ++i)
    dist[i] = (database_descriptors.row(i).transpose() - query_desc).norm();
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return database[a].id < database[b].id;  // deterministic tie-break
  });

  RetrievalResult res;
  res.query_id = query.id;
  res.ranked.reserve(std::min(max_rank, db_size));
  for (std::size_t rank = 0; rank < db_size; ++rank) {
    const int idx = order[rank];
    if (rank < max_rank) res.ranked.push_back({database[idx].id, dist[idx]});
    if (!res.correct_rank && geo_distance(query, database[idx]) <= radius) {
      res.correct_rank = static_cast<int>(rank) + 1;
      res.has_geo_match = true;
    }
  }
  return res;
}

}  // namespace

RecallTable recall_at_n(const std::vector<GeoImageRecord>& queries,
                        const std::vector<GeoImageRecord>& database,
                        const Eigen::MatrixXd& query_descriptors,
                        const Eigen::MatrixXd& database_descriptors,
                        double radius_meters, const std::vector<int>& ns,
                        int threads) {
  if (radius_meters <= 0.0)
    throw std::invalid_argument("recall_at_n: radius must be > 0");
  if (ns.empty()) throw std::invalid_argument("recall_at_n: empty N list");
  if (queries.size() != static_cast<std::size_t>(query_descriptors.rows()) ||
      database.size() != static_cast<std::size_t>(database_descriptors.rows()))
    throw std::invalid_argument("recall_at_n: descriptor/record count mismatch");
  if (database.empty())
    throw std::invalid_argument("recall_at_n: empty database");

  const std::size_t max_rank =
      static_cast<std::size_t>(*std::max_element(ns.begin(), ns.end()));

  RecallTable table;
  table.ns = ns;
  table.details.resize(queries.size());

  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t q = begin; q < end; ++q)
      table.details[q] = evaluate_query(
          queries[q], database, query_descriptors.row(q).transpose(),
          database_descriptors, radius_meters, max_rank);
  };

  if (threads <= 1 || queries.size() < 2) {
    worker(0, queries.size());
  } else {
    const std::size_t n_workers =
        std::min<std::size_t>(threads, queries.size());
    std::vector<std::thread> pool;
    const std::size_t chunk = (queries.size() + n_workers - 1) / n_workers;
    for (std::size_t w = 0; w < n_workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(queries.size(), begin + chunk);
      if (begin < end) pool.emplace_back(worker, begin, end);
    }
    for (auto& t : pool) t.join();
  }

  int eligible = 0;
  for (const auto& res : table.details)
    if (res.has_geo_match) ++eligible;
  table.evaluated_queries = eligible;
  table.excluded_queries = static_cast<int>(queries.size()) - eligible;

  table.recalls.resize(ns.size(), 0.0);
  for (std::size_t k = 0; k < ns.size(); ++k) {
    int hits = 0;
    for (const auto& res : table.details)
      if (res.has_geo_match && res.correct_rank && *res.correct_rank <= ns[k])
        ++hits;
    table.recalls[k] =
        eligible > 0 ? static_cast<double>(hits) / eligible : 0.0;
  }
  return table;
}

void write_recall_csv(const std::filesystem::path& path,
                      const RecallTable& table) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "N,recall\n";
  char buf[64];
  for (std::size_t k = 0; k < table.ns.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g\n", table.ns[k],
                  table.recalls[k]);
    out << buf;
  }
}

void write_details_json(const std::filesystem::path& path,
                        const RecallTable& table, double radius_meters) {
  nlohmann::json j;
  j["radius_meters"] = radius_meters;
  j["evaluated_queries"] = table.evaluated_queries;
  j["excluded_queries"] = table.excluded_queries;
  nlohmann::json queries = nlohmann::json::array();
  for (const auto& res : table.details) {
    nlohmann::json entry;
    entry["query_id"] = res.query_id;
    entry["has_geo_match"] = res.has_geo_match;
    if (res.correct_rank)
      entry["correct_rank"] = *res.correct_rank;
    else
      entry["correct_rank"] = nullptr;
    nlohmann::json ranked = nlohmann::json::array();
    for (const auto& m : res.ranked)
      ranked.push_back({{"id", m.database_id}, {"distance", m.distance}});
    entry["ranked"] = ranked;
    queries.push_back(entry);
  }
  j["queries"] = queries;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
}

std::vector<int> parse_ns(const std::string& csv) {
  std::vector<int> ns;
  const char* p = csv.data();
  const char* end = p + csv.size();
  while (p < end) {
    int value = 0;
    auto [next, ec] = std::from_chars(p, end, value);
    if (ec != std::errc() || value < 1)
      throw std::invalid_argument("invalid N list: " + csv);
    ns.push_back(value);
    p = next;
    if (p < end) {
      if (*p != ',') throw std::invalid_argument("invalid N list: " + csv);
      ++p;
    }
  }
  if (ns.empty()) throw std::invalid_argument("empty N list");
  return ns;
}

}  // namespace apanet
