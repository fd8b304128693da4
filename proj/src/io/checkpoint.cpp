#include "deepnotch/io/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "deepnotch/errors.hpp"

namespace deepnotch::io {

namespace {

static_assert(sizeof(float) == 4);

using Reason = CheckpointError::Reason;

class Writer {
 public:
  template <typename T>
  void put(T v) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                 std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                    std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    U u;
    std::memcpy(&u, &v, sizeof u);
    for (std::size_t i = 0; i < sizeof u; ++i) bytes_.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
  }
  void put_str(const std::string& s) {
    if (s.size() > 0xFFFF) throw ContractError("checkpoint: name too long");
    put<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  Reader(const std::vector<char>& b, const std::string& path) : b_(b), path_(path) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    std::conditional_t<sizeof(T) == 8, std::uint64_t,
                       std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                          std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>
        u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<decltype(u)>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, &u, sizeof v);
    return v;
  }
  std::string get_str() {
    const auto n = get<std::uint16_t>();
    need(n);
    std::string s(b_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) {
      throw CheckpointError(Reason::kTruncated, path_ + ": truncated payload at byte " + std::to_string(pos_));
    }
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  const std::vector<char>& b_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kKpn: return "kpn";
    case ModelKind::kDetector: return "detector";
  }
  return "unknown";
}

std::int64_t Checkpoint::meta(const std::string& key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return v;
  }
  throw ConfigError("checkpoint lacks metadata key '" + key + "'");
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  Writer w;
  for (char c : {'N', 'F', 'C', 'K'}) w.put<std::uint8_t>(static_cast<std::uint8_t>(c));
  w.put<std::uint16_t>(kCheckpointVersion);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(ckpt.kind));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    w.put_str(k);
    w.put<std::int64_t>(v);
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    w.put_str(t.name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(t.value.rank()));
    for (int d : t.value.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (float f : t.value.data()) w.put<float>(f);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string p = path.string();
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "NFCK", 4) != 0) {
    throw CheckpointError(Reason::kBadMagic, p + ": bad magic (not an NFCK checkpoint)");
  }
  Reader r(bytes, p);
  for (int i = 0; i < 4; ++i) r.get<std::uint8_t>();
  const auto version = r.get<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError(Reason::kUnsupportedVersion,
                          p + ": unsupported version " + std::to_string(version) + " (expected " +
                              std::to_string(kCheckpointVersion) + ")");
  }
  const auto kind = r.get<std::uint16_t>();
  if (kind != static_cast<std::uint16_t>(ModelKind::kKpn) && kind != static_cast<std::uint16_t>(ModelKind::kDetector)) {
    throw CheckpointError(Reason::kUnknownKind, p + ": unknown model kind " + std::to_string(kind));
  }
  Checkpoint ck;
  ck.kind = static_cast<ModelKind>(kind);
  const auto nmeta = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::string key = r.get_str();
    ck.metadata.emplace_back(std::move(key), r.get<std::int64_t>());
  }
  const auto ntensors = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < ntensors; ++i) {
    NamedTensor nt;
    nt.name = r.get_str();
    const auto rank = r.get<std::uint8_t>();
    nn::Shape shape;
    std::size_t count = 1;
    for (int d = 0; d < rank; ++d) {
      const auto dim = r.get<std::uint32_t>();
      if (dim > (1u << 28)) throw CheckpointError(Reason::kTruncated, p + ": implausible dimension in " + nt.name);
      shape.push_back(static_cast<int>(dim));
      count *= dim;
    }
    r.need(count * 4);
    std::vector<float> data(count);
    for (auto& f : data) f = r.get<float>();
    nt.value = nn::Tensor(std::move(shape), std::move(data));
    ck.tensors.push_back(std::move(nt));
  }
  if (r.remaining() != 0) {
    throw CheckpointError(Reason::kTruncated, p + ": " + std::to_string(r.remaining()) + " trailing bytes");
  }
  return ck;
}

void assign_parameters(const Checkpoint& ckpt, ModelKind expected,
                       std::vector<std::pair<std::string, nn::Var>>& params) {
  if (ckpt.kind != expected) {
    throw CheckpointError(Reason::kUnknownKind, std::string("checkpoint holds a ") + model_kind_name(ckpt.kind) +
                                                    " model, expected " + model_kind_name(expected));
  }
  if (ckpt.tensors.size() != params.size()) {
    throw CheckpointError(Reason::kShapeMismatch, "checkpoint has " + std::to_string(ckpt.tensors.size()) +
                                                      " tensors, model expects " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = ckpt.tensors[i];
    auto& [name, var] = params[i];
    if (t.name != name || t.value.shape() != var.shape()) {
      throw CheckpointError(Reason::kShapeMismatch, "shape table mismatch: checkpoint '" + t.name + "' " +
                                                        nn::shape_str(t.value.shape()) + " vs model '" + name +
                                                        "' " + nn::shape_str(var.shape()));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i].second.mutable_value() = ckpt.tensors[i].value;
}

}  // namespace deepnotch::io
