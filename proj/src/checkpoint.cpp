#include "scam/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "scam/errors.hpp"

namespace scam {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are stored in native little-endian order");

namespace {

constexpr char kMagic[8] = {'S', 'C', 'A', 'M', 'C', 'K', 'P', 'T'};

uint64_t fnv1a(const char* data, size_t n) {
  uint64_t h = 1469598103934665603ull;
  for (size_t i = 0; i < n; ++i) {
    h ^= static_cast<uint8_t>(data[i]);
    h *= 1099511628211ull;
  }
  return h;
}

uint8_t dtype_code(torch::Dtype t) {
  switch (t) {
    case torch::kFloat32: return 0;
    case torch::kFloat64: return 1;
    case torch::kInt64: return 2;
    case torch::kUInt8: return 3;
    default: throw DataError("unsupported tensor dtype in checkpoint");
  }
}

torch::Dtype dtype_from_code(uint8_t c) {
  switch (c) {
    case 0: return torch::kFloat32;
    case 1: return torch::kFloat64;
    case 2: return torch::kInt64;
    case 3: return torch::kUInt8;
    default: throw DataError("unknown dtype code " + std::to_string(c) + " in checkpoint");
  }
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    out_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const void* p, size_t n) { out_.append(static_cast<const char*>(p), n); }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const char* take(size_t n) {
    if (n > in_.size() - pos_) throw DataError("truncated checkpoint");
    const char* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  size_t pos() const { return pos_; }

 private:
  const std::string& in_;
  size_t pos_ = 0;
};

}  // namespace

const torch::Tensor& CheckpointFile::blob(const std::string& name) const {
  for (const auto& [n, t] : blobs) {
    if (n == name) return t;
  }
  throw DataError("checkpoint has no tensor named '" + name + "'");
}

bool CheckpointFile::has_blob(const std::string& name) const {
  for (const auto& entry : blobs) {
    if (entry.first == name) return true;
  }
  return false;
}

std::string encode_checkpoint(const CheckpointFile& file) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.put<uint32_t>(file.version);
  std::string manifest;
  for (const auto& [k, v] : file.manifest) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw DataError("manifest entry '" + k + "' contains a reserved character");
    }
    manifest += k + "=" + v + "\n";
  }
  w.put<uint64_t>(manifest.size());
  w.bytes(manifest.data(), manifest.size());
  w.put<uint64_t>(file.blobs.size());
  for (const auto& [name, tensor] : file.blobs) {
    auto t = tensor.detach().contiguous();
    w.put<uint32_t>(static_cast<uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.put<uint8_t>(dtype_code(t.scalar_type()));
    w.put<uint8_t>(static_cast<uint8_t>(t.dim()));
    for (auto s : t.sizes()) w.put<int64_t>(s);
    const auto nbytes = static_cast<uint64_t>(t.numel() * t.element_size());
    w.put<uint64_t>(nbytes);
    w.bytes(t.data_ptr(), nbytes);
  }
  w.put<uint64_t>(fnv1a(w.str().data(), w.str().size()));
  return std::move(w.str());
}

CheckpointFile decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw DataError("not a checkpoint file (bad magic)");
  }
  const auto body = bytes.size() - sizeof(uint64_t);
  uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));
  if (stored != fnv1a(bytes.data(), body)) throw DataError("checkpoint checksum mismatch");

  Reader r(bytes);
  r.take(sizeof(kMagic));
  CheckpointFile file;
  file.version = r.get<uint32_t>();
  if (file.version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(file.version));
  }
  const auto mlen = r.get<uint64_t>();
  std::istringstream manifest(std::string(r.take(mlen), mlen));
  std::string line;
  while (std::getline(manifest, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("malformed checkpoint manifest line");
    file.manifest[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto count = r.get<uint64_t>();
  for (uint64_t i = 0; i < count; ++i) {
    const auto nlen = r.get<uint32_t>();
    std::string name(r.take(nlen), nlen);
    const auto dtype = dtype_from_code(r.get<uint8_t>());
    const auto rank = r.get<uint8_t>();
    std::vector<int64_t> dims(rank);
    for (auto& d : dims) d = r.get<int64_t>();
    const auto nbytes = r.get<uint64_t>();
    auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
    if (static_cast<uint64_t>(t.numel() * t.element_size()) != nbytes) {
      throw DataError("tensor '" + name + "' payload size disagrees with its shape");
    }
    std::memcpy(t.data_ptr(), r.take(nbytes), nbytes);
    file.blobs.emplace_back(std::move(name), std::move(t));
  }
  if (r.pos() != body) throw DataError("trailing bytes in checkpoint");
  return file;
}

void write_checkpoint(const CheckpointFile& file, const std::string& path) {
  const auto bytes = encode_checkpoint(file);
  const auto tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw DataError("cannot move " + tmp + " to " + path);
}

CheckpointFile read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace scam
