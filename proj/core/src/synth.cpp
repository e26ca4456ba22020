#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "adp/episode.hpp"
#include "adp/errors.hpp"

namespace adp::episode {

namespace {

// Platform-independent uniform draws: std::uniform_real_distribution is
// implementation-defined, mt19937_64 output is not.
class Uniform {
 public:
  explicit Uniform(std::uint64_t seed) : rng_(seed) {}
  double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double symmetric() { return 2.0 * unit() - 1.0; }

 private:
  std::mt19937_64 rng_;
};

constexpr std::size_t kPhaseWindows = 6;
constexpr double kCoarseTravel = 0.08;  // metres per window at the start of a coarse phase
constexpr double kFineTravel = 0.012;

// Travel of window `i` inside a phase of the given kind. Coarse phases grow
// ~6% per window with +-4% jitter; fine phases shrink 15% per window with
// +-3% jitter, which keeps them strictly decreasing.
double phase_travel(bool coarse, std::size_t i, Uniform& u) {
  const double n = static_cast<double>(i);
  if (coarse) return kCoarseTravel * (1.0 + 0.06 * n) * (1.0 + 0.04 * u.symmetric());
  return kFineTravel * std::pow(0.85, n) * (1.0 + 0.03 * u.symmetric());
}

}  // namespace

SynthProfile parse_profile(const std::string& s) {
  if (s == "coarse") return SynthProfile::kCoarse;
  if (s == "fine") return SynthProfile::kFine;
  if (s == "mixed") return SynthProfile::kMixed;
  throw InvalidArgument("unknown profile '" + s + "' (expected coarse|fine|mixed)");
}

const char* to_string(SynthProfile profile) {
  switch (profile) {
    case SynthProfile::kCoarse: return "coarse";
    case SynthProfile::kFine: return "fine";
    case SynthProfile::kMixed: return "mixed";
  }
  return "?";
}

EpisodeLog synth_episode(std::uint64_t seed, SynthProfile profile, std::size_t windows, std::size_t omega) {
  if (windows < 1) throw InvalidArgument("synth_episode: need at least one window");
  if (omega < 1) throw InvalidArgument("synth_episode: omega must be >= 1");
  Uniform u(seed);
  EpisodeLog log;
  log.meta.omega = omega;
  log.meta.angle_unit = AngleUnit::kRadians;

  // Heading drifts slowly; rotation increments are small and never change the
  // arc length because body-frame rotations preserve step norms.
  double heading = 2.0 * std::numbers::pi * u.unit();
  double elevation = 0.3 * u.symmetric();
  std::int64_t step = 0;
  for (std::size_t w = 0; w < windows; ++w) {
    bool coarse = profile == SynthProfile::kCoarse;
    std::size_t in_phase = w;
    if (profile == SynthProfile::kMixed) {
      coarse = (w / kPhaseWindows) % 2 == 0;
      in_phase = w % kPhaseWindows;
    }
    const double travel = phase_travel(coarse, in_phase, u);
    const double rot_scale = coarse ? 0.05 : 0.01;
    const double gripper = coarse ? 1.0 : (in_phase + 1 == kPhaseWindows ? -1.0 : 1.0);

    // Split the window's travel unevenly across its steps.
    std::vector<double> share(omega);
    double total = 0.0;
    for (auto& s : share) {
      s = 0.5 + u.unit();
      total += s;
    }
    for (std::size_t k = 0; k < omega; ++k) {
      heading += 0.1 * u.symmetric();
      elevation = std::clamp(elevation + 0.05 * u.symmetric(), -0.6, 0.6);
      const double len = travel * share[k] / total;
      kin::ActionIncrement inc;
      inc.dx = len * std::cos(elevation) * std::cos(heading);
      inc.dy = len * std::cos(elevation) * std::sin(heading);
      inc.dz = len * std::sin(elevation);
      inc.droll = rot_scale * u.symmetric();
      inc.dpitch = rot_scale * u.symmetric();
      inc.dyaw = rot_scale * u.symmetric();
      inc.gripper = gripper;
      log.step_ids.push_back(step++);
      log.steps.push_back(inc);
    }
  }
  return log;
}

}  // namespace adp::episode
