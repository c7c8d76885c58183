#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gsvin/params.hpp"
#include "gsvin/tape.hpp"

namespace gsvin {

/// Builds a scalar loss on `tape` from one Var per parameter tensor (same order as the ParamSet).
using LossBuilder = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-4;
  std::size_t samples = 200;  // parameters to check, excluding skipped ones
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::string tensor;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool skipped = false;  // perturbation crossed a non-differentiable point
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::size_t failures = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Relative error |a - n| / max(1e-8, |a| + |n|).
double relative_error(double analytic, double numeric);

/// Compares reverse-mode gradients against central differences on a random subsample of scalars.
///
/// A scalar is skipped, not failed, when either perturbation changes the tape's branch
/// signature (an argmax winner or a leaky_relu side flips). Sampling continues until
/// `samples` scalars were checked or every scalar was visited.
GradCheckReport finite_diff_check(const ParamSet& params, const LossBuilder& build, const GradCheckOptions& options);

}  // namespace gsvin
