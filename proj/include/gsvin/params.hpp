#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "gsvin/tensor.hpp"

namespace gsvin {

struct NamedTensor {
  std::string name;
  Tensor value;
  bool operator==(const NamedTensor&) const = default;
};

/// Ordered collection of named tensors (model weights, optimizer slots).
class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(std::vector<NamedTensor> entries);

  void add(std::string name, Tensor value);
  bool contains(std::string_view name) const;
  Tensor& get(std::string_view name);
  const Tensor& get(std::string_view name) const;

  std::vector<NamedTensor>& entries() { return entries_; }
  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  /// Total number of scalars across all tensors.
  std::size_t scalar_count() const;

  bool operator==(const ParamSet&) const = default;

 private:
  std::vector<NamedTensor> entries_;
};

}  // namespace gsvin
