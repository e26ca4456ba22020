#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "adp/se3_kinematics.hpp"

namespace adp::episode {

enum class AngleUnit { kRadians, kDegrees };

struct EpisodeMeta {
  std::size_t omega = 8;
  AngleUnit angle_unit = AngleUnit::kRadians;  // unit used in the file
  // Optional per-window embedding files, relative to the log's directory.
  std::vector<std::string> embedding_files;
};

// A replayable action log. Angles are always held in radians; degree input
// is converted at load time.
struct EpisodeLog {
  EpisodeMeta meta;
  std::vector<std::int64_t> step_ids;
  std::vector<kin::ActionIncrement> steps;
  std::vector<std::string> warnings;

  std::size_t window_count() const { return meta.omega == 0 ? 0 : steps.size() / meta.omega; }
  std::size_t dropped_steps() const { return meta.omega == 0 ? steps.size() : steps.size() % meta.omega; }

  // Window i (1-based) starting from the identity pose.
  kin::ActionWindow window(std::size_t index) const;
  std::vector<kin::ActionWindow> windows() const;
};

// JSONL: optional first line {"meta": {"omega": int, "angle_unit": "rad"|"deg",
// "embedding_files": [..]}}, then one {"step": int, "action": [7 numbers]} per
// line. Blank lines are ignored. `default_omega` applies when the header is
// absent or omits omega. A trailing partial window is kept in `steps` but
// excluded from windows(), with a warning.
EpisodeLog parse_episode(std::istream& in, std::size_t default_omega = 8);
EpisodeLog load_episode(const std::filesystem::path& path, std::size_t default_omega = 8);

// Writes the log in radians with a meta header. Round-trips through
// parse_episode bit-exactly.
void write_episode(std::ostream& out, const EpisodeLog& log);

std::vector<double> window_distances(const EpisodeLog& log, const kin::KinematicsConfig& config = {});

enum class SynthProfile { kCoarse, kFine, kMixed };

SynthProfile parse_profile(const std::string& s);
const char* to_string(SynthProfile profile);

// Deterministic synthetic log with `windows` full windows of `omega` steps.
// Coarse phases ramp the per-window travel up; fine phases decay it, so the
// extrema gate prunes in the former and keeps full vision in the latter.
// Mixed alternates six-window phases of each.
EpisodeLog synth_episode(std::uint64_t seed, SynthProfile profile, std::size_t windows,
                         std::size_t omega = 8);

}  // namespace adp::episode
