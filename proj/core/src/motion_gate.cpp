#include "adp/motion_gate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "adp/errors.hpp"

namespace adp::gate {

namespace {

// delta >= sum / n, where values within the rounding bound of the left-to-right
// sum count as equal. A constant stream such as [0.1, 0.1, 0.1] then compares
// equal to its own mean, and rescaling the stream cannot flip a tie.
bool at_or_above_mean(double delta, double sum, std::size_t n) {
  const double count = static_cast<double>(n);
  const double mean = sum / count;
  const double slack = count * std::numeric_limits<double>::epsilon() * std::abs(mean);
  return delta >= mean - slack;
}

}  // namespace

void GateConfig::validate() const {
  if (tau < 1) throw InvalidArgument("gate config: tau must be >= 1");
  if (max_consecutive_pruned < 1) {
    throw InvalidArgument("gate config: max_consecutive_pruned must be >= 1");
  }
  if (omega < 1) throw InvalidArgument("gate config: omega must be >= 1");
}

VisionState mean_rule(std::span<const double> delta_history) {
  if (delta_history.empty()) throw InvalidState("mean_rule: empty delta history");
  double sum = 0.0;
  for (double d : delta_history) sum += d;
  return at_or_above_mean(delta_history.back(), sum, delta_history.size()) ? VisionState::kPruned
                                                                           : VisionState::kFull;
}

VisionState extrema_rule(std::span<const double> delta_history, std::size_t tau,
                         VisionState previous, ThirdCase third_case) {
  if (delta_history.empty()) throw InvalidState("extrema_rule: empty delta history");
  if (tau < 1) throw InvalidArgument("extrema_rule: tau must be >= 1");
  const std::size_t n = std::min(tau, delta_history.size());
  const auto lookback = delta_history.last(n);
  const auto [lo, hi] = std::minmax_element(lookback.begin(), lookback.end());
  const double current = delta_history.back();
  if (current >= *hi) return VisionState::kPruned;
  if (current <= *lo) return VisionState::kFull;
  return third_case == ThirdCase::kInherit ? previous : VisionState::kPruned;
}

VisionState advance_gate(GateState& state, const GateConfig& config, double delta) {
  if (!std::isfinite(delta)) throw InvalidArgument("gate_step: non-finite delta");
  if (delta < 0.0) throw InvalidArgument("gate_step: negative delta");
  config.validate();

  state.delta_history.push_back(delta);
  state.delta_sum += delta;
  state.window_index += 1;

  VisionState decision;
  if (config.rule == Rule::kMean) {
    decision = at_or_above_mean(delta, state.delta_sum, state.delta_history.size()) ? VisionState::kPruned
                                                                                     : VisionState::kFull;
  } else {
    decision = extrema_rule(state.delta_history, config.tau, state.current, config.third_case);
  }

  if (state.window_index <= config.cold_start_windows) {
    decision = VisionState::kFull;
  } else if (state.consecutive_pruned >= config.max_consecutive_pruned) {
    decision = VisionState::kFull;
  }

  state.consecutive_pruned = decision == VisionState::kPruned ? state.consecutive_pruned + 1 : 0;
  state.current = decision;
  return decision;
}

GateStep gate_step(const GateState& state, const GateConfig& config, double delta) {
  GateStep step{state, VisionState::kFull};
  step.decision = advance_gate(step.next, config, delta);
  return step;
}

GateTrace gate_trace(std::span<const double> deltas, const GateConfig& config) {
  if (deltas.empty()) throw InvalidArgument("gate_trace: empty delta stream");
  config.validate();
  MotionGate gate(config);
  GateTrace trace;
  trace.decisions.reserve(deltas.size());
  for (double d : deltas) {
    const VisionState s = gate.observe(d);
    trace.decisions.push_back(s);
    if (s == VisionState::kPruned) ++trace.pruned;
  }
  trace.gamma = static_cast<double>(trace.pruned) / static_cast<double>(deltas.size());
  return trace;
}

MotionGate::MotionGate(GateConfig config) : config_(std::move(config)) { config_.validate(); }

VisionState MotionGate::observe(double delta) { return advance_gate(state_, config_, delta); }

}  // namespace adp::gate
