#include "deepnotch/io/dataset.hpp"

#include <fstream>
#include <sstream>

#include "deepnotch/errors.hpp"
#include "deepnotch/io/png.hpp"
#include "deepnotch/io/report.hpp"

namespace deepnotch::io {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kManifestHeader = {"filename", "kind", "stride", "kernel", "gain", "seed"};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void write_manifest(const std::vector<ManifestRow>& rows, const fs::path& path) {
  Table t;
  t.header = kManifestHeader;
  for (const auto& r : rows) {
    t.rows.push_back({r.filename, r.kind, std::int64_t{r.stride}, std::int64_t{r.kernel}, r.gain,
                      std::to_string(r.seed)});
  }
  write_report(t, path);
}

std::vector<ManifestRow> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing manifest " + path.string());
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != kManifestHeader) {
    throw DataError(path.string() + ": unexpected manifest header");
  }
  std::vector<ManifestRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != kManifestHeader.size()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 6 fields");
    }
    try {
      rows.push_back({f[0], f[1], std::stoi(f[2]), std::stoi(f[3]), std::stod(f[4]), std::stoull(f[5])});
    } catch (const std::logic_error&) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed numeric field");
    }
  }
  return rows;
}

PairedDataset PairedDataset::open(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("dataset root " + root.string() + " is not a directory");
  PairedDataset ds;
  ds.root_ = root;
  ds.rows_ = read_manifest(root / "manifest.csv");
  if (ds.rows_.empty()) throw DataError("dataset " + root.string() + " is empty");
  for (const auto& r : ds.rows_) {
    if (!fs::exists(root / "fake" / r.filename)) throw DataError("missing fake image " + r.filename);
    if (!fs::exists(root / "real" / r.filename)) throw DataError("fake " + r.filename + " has no real counterpart");
  }
  return ds;
}

ImagePair PairedDataset::load_pair(std::size_t i) const {
  const auto& r = rows_.at(i);
  ImagePair p{load_image(root_ / "real" / r.filename), load_image(root_ / "fake" / r.filename)};
  if (!p.real.same_dims(p.fake)) throw DataError("pair " + r.filename + ": real and fake dimensions differ");
  return p;
}

std::vector<ImagePair> PairedDataset::load_all() const {
  std::vector<ImagePair> out;
  out.reserve(rows_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) out.push_back(load_pair(i));
  return out;
}

}  // namespace deepnotch::io
