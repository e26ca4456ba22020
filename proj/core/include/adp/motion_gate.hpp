#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace adp::gate {

enum class VisionState : std::uint8_t { kFull = 0, kPruned = 1 };

enum class Rule {
  kMean,     // prune when delta_i >= running mean of delta_1..delta_i (ties within rounding count)
  kExtrema,  // compare against max/min of the last tau deltas
};

// What the extrema rule does when delta_i lies strictly between the extrema.
enum class ThirdCase { kInherit, kForcePrune };

struct GateConfig {
  Rule rule = Rule::kExtrema;
  // Extrema lookback in windows. Not a published value; 3 is our default.
  std::size_t tau = 3;
  ThirdCase third_case = ThirdCase::kForcePrune;
  std::size_t cold_start_windows = 2;
  std::size_t max_consecutive_pruned = 3;
  std::size_t omega = 8;

  // Throws InvalidArgument on tau == 0, max_consecutive_pruned == 0, omega == 0.
  void validate() const;
};

struct GateState {
  VisionState current = VisionState::kFull;
  std::size_t window_index = 0;  // number of completed windows
  std::vector<double> delta_history;
  double delta_sum = 0.0;  // left-to-right sum of delta_history
  std::size_t consecutive_pruned = 0;
};

// Running-mean rule over the whole history; delta_i is history.back().
VisionState mean_rule(std::span<const double> delta_history);

// Adjacent-extrema rule over the last min(tau, i) entries; delta_i is
// history.back(). `previous` is s_i, used by ThirdCase::kInherit.
VisionState extrema_rule(std::span<const double> delta_history, std::size_t tau,
                         VisionState previous, ThirdCase third_case);

struct GateStep {
  GateState next;
  VisionState decision;  // state for the next forward
};

// One iteration of the gating loop: append delta, apply the rule, then the
// cold-start and consecutive-prune overrides.
GateStep gate_step(const GateState& state, const GateConfig& config, double delta);

// In-place form of gate_step; returns the decision.
VisionState advance_gate(GateState& state, const GateConfig& config, double delta);

struct GateTrace {
  std::vector<VisionState> decisions;
  std::size_t pruned = 0;
  double gamma = 0.0;  // pruned / decisions.size()
};

GateTrace gate_trace(std::span<const double> deltas, const GateConfig& config);

// Owning streaming wrapper; one instance per episode.
class MotionGate {
 public:
  explicit MotionGate(GateConfig config);

  VisionState observe(double delta);
  const GateState& state() const noexcept { return state_; }
  const GateConfig& config() const noexcept { return config_; }
  void reset() { state_ = {}; }

 private:
  GateConfig config_;
  GateState state_;
};

inline int to_int(VisionState s) { return static_cast<int>(s); }

}  // namespace adp::gate
