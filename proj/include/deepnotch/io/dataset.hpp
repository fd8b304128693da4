#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "deepnotch/io/image.hpp"

namespace deepnotch::io {

struct ManifestRow {
  std::string filename;
  std::string kind;  // checkerboard | sinusoid
  int stride = 0;
  int kernel = 0;
  double gain = 0.0;
  std::uint64_t seed = 0;
};

struct ImagePair {
  Image real;
  Image fake;
};

// Directory layout: <root>/real/<file>, <root>/fake/<file>, <root>/manifest.csv.
class PairedDataset {
 public:
  // Reads the manifest and checks that every listed pair exists on disk.
  // Throws DataError for layout problems.
  static PairedDataset open(const std::filesystem::path& root);

  const std::filesystem::path& root() const { return root_; }
  const std::vector<ManifestRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  // Loads pair i; DataError when real and fake dimensions differ.
  ImagePair load_pair(std::size_t i) const;
  std::vector<ImagePair> load_all() const;

 private:
  std::filesystem::path root_;
  std::vector<ManifestRow> rows_;
};

void write_manifest(const std::vector<ManifestRow>& rows, const std::filesystem::path& path);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

}  // namespace deepnotch::io
