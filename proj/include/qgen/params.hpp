#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qgen/rng.hpp"
#include "qgen/tensor.hpp"

namespace qgen {

// Registry of trainable tensors. Iteration follows registration order, which
// fixes the checkpoint layout and makes optimizer sweeps deterministic.
class ParamStore {
 public:
  // Uniform init over [lo, hi); every created tensor requires grad.
  ad::Tensor create(const std::string& name, ad::Shape shape, Rng& rng,
                    double lo = -0.1, double hi = 0.1);
  ad::Tensor create_zeros(const std::string& name, ad::Shape shape);

  ad::Tensor get(const std::string& name) const;
  bool has(const std::string& name) const;

  const std::vector<std::pair<std::string, ad::Tensor>>& entries() const {
    return entries_;
  }
  // Entries whose name starts with prefix, in registration order.
  std::vector<std::pair<std::string, ad::Tensor>> group(
      const std::string& prefix) const;

  void zero_grads();
  std::size_t total_coords() const;

 private:
  std::vector<std::pair<std::string, ad::Tensor>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Binary snapshot: magic and version, an index of (name, extents) entries,
// then each tensor's doubles little-endian in index order. Loading restores
// into an existing store and insists on identical names and shapes.
void save_checkpoint(const std::string& path, const ParamStore& params);
void load_checkpoint(const std::string& path, ParamStore& params);

}  // namespace qgen
