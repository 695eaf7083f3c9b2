#include "apanet/io.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <unordered_set>

namespace apanet {
namespace detail {

BinaryWriter::BinaryWriter(const std::filesystem::path& path)
    : out_(path, std::ios::binary) {
  if (!out_) throw IoError("cannot open for writing: " + path.string());
}

void BinaryWriter::u32(std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out_.write(reinterpret_cast<const char*>(b), 4);
}

void BinaryWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void BinaryWriter::f64(double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  u32(static_cast<std::uint32_t>(bits));
  u32(static_cast<std::uint32_t>(bits >> 32));
}

void BinaryWriter::magic(const char tag[4]) { out_.write(tag, 4); }

BinaryReader::BinaryReader(const std::filesystem::path& path)
    : in_(path, std::ios::binary), path_(path.string()) {
  if (!in_) throw IoError("cannot open for reading: " + path_);
}

void BinaryReader::fill(unsigned char* dst, std::size_t n) {
  in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n)
    throw FormatError("truncated file: " + path_);
}

std::uint32_t BinaryReader::u32() {
  unsigned char b[4];
  fill(b, 4);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

float BinaryReader::f32() { return std::bit_cast<float>(u32()); }

double BinaryReader::f64() {
  const std::uint64_t lo = u32();
  const std::uint64_t hi = u32();
  return std::bit_cast<double>(lo | (hi << 32));
}

void BinaryReader::expect_magic(const char tag[4], const std::string& what) {
  unsigned char b[4];
  fill(b, 4);
  if (std::memcmp(b, tag, 4) != 0)
    throw FormatError("bad magic in " + path_ + " (expected " + what + ")");
}

}  // namespace detail

void write_feature_map(const std::filesystem::path& path, const FeatureMap& fm) {
  if (fm.width < 1 || fm.height < 1 || fm.depth < 1)
    throw std::invalid_argument("write_feature_map: empty tensor");
  detail::BinaryWriter w(path);
  w.magic("APAF");
  w.u32(static_cast<std::uint32_t>(fm.width));
  w.u32(static_cast<std::uint32_t>(fm.height));
  w.u32(static_cast<std::uint32_t>(fm.depth));
  for (double v : fm.data) w.f32(static_cast<float>(v));
}

FeatureMap read_feature_map(const std::filesystem::path& path) {
  detail::BinaryReader r(path);
  r.expect_magic("APAF", "APAF feature map");
  const auto w = r.u32();
  const auto h = r.u32();
  const auto d = r.u32();
  if (w == 0 || h == 0 || d == 0)
    throw FormatError("zero dimension in " + path.string());
  FeatureMap fm(static_cast<int>(w), static_cast<int>(h), static_cast<int>(d));
  for (double& v : fm.data) v = r.f32();
  if (!fm.all_finite())
    throw FormatError("non-finite values in " + path.string());
  return fm;
}

void write_descriptor_matrix(const std::filesystem::path& path,
                             const Eigen::MatrixXd& rows) {
  detail::BinaryWriter w(path);
  w.magic("APAD");
  w.u32(static_cast<std::uint32_t>(rows.rows()));
  w.u32(static_cast<std::uint32_t>(rows.cols()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    for (Eigen::Index j = 0; j < rows.cols(); ++j)
      w.f32(static_cast<float>(rows(i, j)));
}

Eigen::MatrixXd read_descriptor_matrix(const std::filesystem::path& path) {
  detail::BinaryReader r(path);
  r.expect_magic("APAD", "APAD descriptor matrix");
  const auto n = r.u32();
  const auto d = r.u32();
  Eigen::MatrixXd m(n, d);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < d; ++j) m(i, j) = r.f32();
  return m;
}

std::vector<GeoImageRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("manifest is not valid JSON: " + path.string() + ": " +
                      e.what());
  }
  if (!j.is_array())
    throw FormatError("manifest must be a JSON array: " + path.string());
  std::vector<GeoImageRecord> records;
  records.reserve(j.size());
  std::unordered_set<std::string> seen;
  for (const auto& item : j) {
    GeoImageRecord rec;
    rec.id = item.at("id").get<std::string>();
    rec.x = item.at("x").get<double>();
    rec.y = item.at("y").get<double>();
    rec.featuremap_path = item.at("featuremap_path").get<std::string>();
    rec.role = role_from_string(item.at("role").get<std::string>());
    if (!std::isfinite(rec.x) || !std::isfinite(rec.y))
      throw FormatError("non-finite coordinates for id " + rec.id);
    if (!seen.insert(rec.id).second)
      throw FormatError("duplicate id in manifest: " + rec.id);
    records.push_back(std::move(rec));
  }
  return records;
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<GeoImageRecord>& records) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& rec : records) {
    j.push_back({{"id", rec.id},
                 {"x", rec.x},
                 {"y", rec.y},
                 {"featuremap_path", rec.featuremap_path},
                 {"role", to_string(rec.role)}});
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
}

void write_id_list(const std::filesystem::path& path,
                   const std::vector<std::string>& ids) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (const auto& id : ids) out << id << "\n";
}

std::vector<std::string> read_id_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open id list: " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ids.push_back(line);
  return ids;
}

std::filesystem::path resolve_map_path(const std::filesystem::path& manifest_path,
                                       const std::string& featuremap_path) {
  std::filesystem::path p(featuremap_path);
  if (p.is_absolute()) return p;
  return manifest_path.parent_path() / p;
}

}  // namespace apanet
