#pragma once

#include "apanet/types.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace apanet {

// File cannot be opened / read / written.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Magic-byte mismatch or structurally corrupt content.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Feature-map file: magic "APAF", little-endian u32 W, u32 H, u32 D,
// then W*H*D little-endian f32 values in canonical (H, W, D) layout.
void write_feature_map(const std::filesystem::path& path, const FeatureMap& fm);
FeatureMap read_feature_map(const std::filesystem::path& path);

// Descriptor-matrix file: magic "APAD", u32 rows, u32 dim, f32 values
// row-major.
void write_descriptor_matrix(const std::filesystem::path& path,
                             const Eigen::MatrixXd& rows);
Eigen::MatrixXd read_descriptor_matrix(const std::filesystem::path& path);

// Manifest: JSON array of GeoImageRecord objects.
std::vector<GeoImageRecord> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    const std::vector<GeoImageRecord>& records);

// Plain-text sidecar listing descriptor row ids, one per line.
void write_id_list(const std::filesystem::path& path,
                   const std::vector<std::string>& ids);
std::vector<std::string> read_id_list(const std::filesystem::path& path);

// Resolves a featuremap_path relative to the manifest's directory when
// it is not absolute.
std::filesystem::path resolve_map_path(const std::filesystem::path& manifest_path,
                                       const std::string& featuremap_path);

namespace detail {

// Little-endian scalar packing shared by every binary format.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path);
  void u32(std::uint32_t v);
  void f32(float v);
  void f64(double v);
  void magic(const char tag[4]);

 private:
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path);
  std::uint32_t u32();
  float f32();
  double f64();
  void expect_magic(const char tag[4], const std::string& what);

 private:
  void fill(unsigned char* dst, std::size_t n);
  std::ifstream in_;
  std::string path_;
};

}  // namespace detail
}  // namespace apanet
