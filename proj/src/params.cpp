#include "gsvin/params.hpp"

#include <algorithm>

#include "gsvin/errors.hpp"

namespace gsvin {

ParamSet::ParamSet(std::vector<NamedTensor> entries) : entries_(std::move(entries)) {}

void ParamSet::add(std::string name, Tensor value) {
  if (contains(name)) throw UsageError("parameter '" + name + "' already present");
  entries_.push_back({std::move(name), std::move(value)});
}

bool ParamSet::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const NamedTensor& e) { return e.name == name; });
}

Tensor& ParamSet::get(std::string_view name) {
  return const_cast<Tensor&>(static_cast<const ParamSet&>(*this).get(name));
}

const Tensor& ParamSet::get(std::string_view name) const {
  for (const NamedTensor& e : entries_) {
    if (e.name == name) return e.value;
  }
  throw UsageError("no parameter named '" + std::string(name) + "'");
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const NamedTensor& e : entries_) n += e.value.size();
  return n;
}

}  // namespace gsvin
