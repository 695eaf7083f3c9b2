#pragma once

#include "apanet/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace apanet {

// Planar Euclidean distance in meters.
double geo_distance(const GeoImageRecord& a, const GeoImageRecord& b);

struct RankedMatch {
  std::string database_id;
  double distance;  // descriptor distance, ascending
};

struct RetrievalResult {
  std::string query_id;
  std::vector<RankedMatch> ranked;       // truncated to max_rank
  std::optional<int> correct_rank;       // 1-based, over the full ranking
  bool has_geo_match = false;            // any database image within radius
};

struct RecallTable {
  std::vector<int> ns;
  std::vector<double> recalls;
  int evaluated_queries = 0;
  int excluded_queries = 0;  // no geographically correct database image
  std::vector<RetrievalResult> details;
};

// Exhaustive nearest-neighbor retrieval: rank database descriptors by
// ascending Euclidean distance (ties broken by database id), then count
// queries whose first geographically correct hit appears within the top
// N. Queries with no correct database image at all are excluded from
// the denominator.
RecallTable recall_at_n(const std::vector<GeoImageRecord>& queries,
                        const std::vector<GeoImageRecord>& database,
                        const Eigen::MatrixXd& query_descriptors,
                        const Eigen::MatrixXd& database_descriptors,
                        double radius_meters, const std::vector<int>& ns,
                        int threads = 1);

void write_recall_csv(const std::filesystem::path& path,
                      const RecallTable& table);
void write_details_json(const std::filesystem::path& path,
                        const RecallTable& table, double radius_meters);

std::vector<int> parse_ns(const std::string& csv);

}  // namespace apanet
