#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gsvin/dataset.hpp"
#include "gsvin/model.hpp"
#include "gsvin/tensor.hpp"

namespace gsvin {

/// Outcome of one self-check suite.
struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// VI kernel (8, 2, f, f) encoding the deterministic-move MDP: W^R_a has a centre tap of 1 and
/// W^V_a a single tap gamma at the offset of action a, so Q_a(s) = R(s) + gamma * V(s + offset_a).
Tensor crafted_vi_kernel(int f, double gamma);

/// VI kernel (8, 2, f, f) with every tap of both halves equal to `weight`.
Tensor positive_vi_kernel(int f, double weight);

/// Runs vi_module on constant inputs and returns V_k as a row-major grid for sample 0.
std::vector<double> vi_values(const Tensor& reward, const Tensor& kernel, int k);

/// Heuristic reproduces the embedded 32x32 table and the (16, 32, 64) x f=11 counts.
CheckResult check_heuristic_table4();

/// vi_module with crafted_vi_kernel against tabular_vi truncated at k on random maps.
CheckResult check_vi_equivalence(int maps, int max_size, std::uint64_t seed);

/// Positive support of V_k from one reward cell equals the Chebyshev ball of radius k (f-1)/2.
CheckResult check_propagation_radius(std::span<const int> f_values, std::span<const int> k_values, int size);

/// Finite differences on `samples` parameters of the full model loss over an 8x8 batch.
CheckResult check_gradients(Variant variant, std::size_t samples, std::uint64_t seed);

/// A* path cost equals the Dijkstra distance on `maps` random maps of each size.
CheckResult check_astar_dijkstra(std::span<const int> sizes, int maps, std::uint64_t seed);

/// Teacher-forced rollouts reach the goal in exactly optimal_length steps on every sample.
CheckResult check_oracle_replay(std::span<const PlanningSample> samples, const std::string& label);

/// Two generate -> train -> eval pipelines with the same seed agree bitwise.
CheckResult check_determinism(std::uint64_t seed);

}  // namespace gsvin
