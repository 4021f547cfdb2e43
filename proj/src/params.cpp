#include "qgen/params.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "qgen/error.hpp"

namespace qgen {

namespace {
constexpr char kMagic[8] = {'Q', 'G', 'C', 'K', 'P', 'T', '0', '\n'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

ad::Tensor ParamStore::create(const std::string& name, ad::Shape shape, Rng& rng,
                              double lo, double hi) {
  if (index_.count(name) != 0) {
    throw ContractError("parameter '" + name + "' registered twice");
  }
  std::vector<double> data(ad::numel(shape));
  for (double& v : data) v = rng.uniform(lo, hi);
  ad::Tensor t = ad::Tensor::make(std::move(shape), std::move(data), true);
  index_.emplace(name, entries_.size());
  entries_.emplace_back(name, t);
  return t;
}

ad::Tensor ParamStore::create_zeros(const std::string& name, ad::Shape shape) {
  if (index_.count(name) != 0) {
    throw ContractError("parameter '" + name + "' registered twice");
  }
  std::vector<double> data(ad::numel(shape), 0.0);
  ad::Tensor t = ad::Tensor::make(std::move(shape), std::move(data), true);
  index_.emplace(name, entries_.size());
  entries_.emplace_back(name, t);
  return t;
}

ad::Tensor ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ContractError("unknown parameter '" + name + "'");
  }
  return entries_[it->second].second;
}

bool ParamStore::has(const std::string& name) const {
  return index_.count(name) != 0;
}

std::vector<std::pair<std::string, ad::Tensor>> ParamStore::group(
    const std::string& prefix) const {
  std::vector<std::pair<std::string, ad::Tensor>> out;
  for (const auto& entry : entries_) {
    if (entry.first.rfind(prefix, 0) == 0) out.push_back(entry);
  }
  return out;
}

void ParamStore::zero_grads() {
  for (auto& entry : entries_) entry.second.zero_grad();
}

std::size_t ParamStore::total_coords() const {
  std::size_t n = 0;
  for (const auto& entry : entries_) n += entry.second.size();
  return n;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw CheckpointError("truncated checkpoint " + path);
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in, const std::string& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) {
    throw CheckpointError("truncated checkpoint " + path);
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in, const std::string& path) {
  std::uint64_t bits = get_u64(in, path);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_u64(out, params.entries().size());
  for (const auto& [name, tensor] : params.entries()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t e : tensor.shape()) put_u64(out, e);
  }
  for (const auto& [name, tensor] : params.entries()) {
    (void)name;
    for (double v : tensor.data()) put_f64(out, v);
  }
  if (!out) throw CheckpointError("write failure on " + path);
}

void load_checkpoint(const std::string& path, ParamStore& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(path + " is not a checkpoint file");
  }
  std::uint32_t version = get_u32(in, path);
  if (version != kVersion) {
    throw CheckpointError(path + ": unsupported format version " +
                          std::to_string(version));
  }
  std::uint64_t count = get_u64(in, path);
  if (count != params.entries().size()) {
    throw CheckpointError(path + ": holds " + std::to_string(count) +
                          " tensors, model has " +
                          std::to_string(params.entries().size()));
  }

  std::vector<std::pair<std::string, ad::Shape>> manifest;
  manifest.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    std::uint32_t name_len = get_u32(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) {
      throw CheckpointError("truncated checkpoint " + path);
    }
    std::uint32_t rank = get_u32(in, path);
    ad::Shape shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<std::size_t>(get_u64(in, path));
    }
    manifest.emplace_back(std::move(name), std::move(shape));
  }

  for (const auto& [name, shape] : manifest) {
    if (!params.has(name)) {
      throw CheckpointError(path + ": tensor '" + name + "' not in model");
    }
    ad::Tensor t = params.get(name);
    if (t.shape() != shape) {
      throw CheckpointError(path + ": tensor '" + name + "' has shape " +
                            ad::shape_str(shape) + ", model expects " +
                            ad::shape_str(t.shape()));
    }
  }

  for (const auto& [name, shape] : manifest) {
    ad::Tensor t = params.get(name);
    for (std::size_t i = 0; i < ad::numel(shape); ++i) {
      t.data()[i] = get_f64(in, path);
    }
  }
}

}  // namespace qgen
