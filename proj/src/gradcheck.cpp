#include "gsvin/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace gsvin {
namespace {

struct Evaluation {
  double loss = 0.0;
  std::vector<std::int32_t> signature;
};

Evaluation evaluate(const ParamSet& params, const LossBuilder& build) {
  Tape tape;
  tape.set_record_branches(true);
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const NamedTensor& e : params.entries()) vars.push_back(tape.constant(e.value));
  const Var loss = build(tape, vars);
  return {tape.value(loss)[0], tape.branch_signature()};
}

}  // namespace

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

GradCheckReport finite_diff_check(const ParamSet& params, const LossBuilder& build, const GradCheckOptions& options) {
  Tape tape;
  tape.set_record_branches(true);
  std::vector<Var> vars;
  for (const NamedTensor& e : params.entries()) vars.push_back(tape.parameter(e.value));
  const Var loss = build(tape, vars);
  tape.backward(loss);
  const std::vector<std::int32_t> baseline = tape.branch_signature();

  // (tensor, element) pairs in a seeded random order
  std::vector<std::pair<std::size_t, std::size_t>> order;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params.entries()[t].value.size(); ++i) order.emplace_back(t, i);
  }
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);

  GradCheckReport report;
  ParamSet probe = params;
  for (const auto& [t, i] : order) {
    if (report.checked >= options.samples) break;
    GradCheckEntry entry;
    entry.tensor = params.entries()[t].name;
    entry.index = i;
    entry.analytic = tape.grad(vars[t])[i];

    double& slot = probe.entries()[t].value[i];
    const double original = slot;
    slot = original + options.step;
    const Evaluation plus = evaluate(probe, build);
    slot = original - options.step;
    const Evaluation minus = evaluate(probe, build);
    slot = original;

    if (plus.signature != baseline || minus.signature != baseline) {
      entry.skipped = true;
      ++report.skipped;
    } else {
      entry.numeric = (plus.loss - minus.loss) / (2.0 * options.step);
      entry.rel_error = relative_error(entry.analytic, entry.numeric);
      report.max_rel_error = std::max(report.max_rel_error, entry.rel_error);
      if (!(entry.rel_error < options.tolerance)) ++report.failures;
      ++report.checked;
    }
    report.entries.push_back(entry);
  }
  report.passed = report.checked > 0 && report.failures == 0;
  return report;
}

}  // namespace gsvin
