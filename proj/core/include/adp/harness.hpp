#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adp/config.hpp"
#include "adp/episode.hpp"
#include "adp/flops_model.hpp"
#include "adp/motion_gate.hpp"
#include "adp/token_scoring.hpp"

namespace adp::harness {

struct WindowRecord {
  std::size_t index = 0;
  double delta = 0.0;
  gate::VisionState decision = gate::VisionState::kFull;
  std::size_t kept = 0;  // visual tokens kept on the pruned path, 0 on full vision
  // Kept visual indices; filled only when embeddings were scored.
  std::vector<std::size_t> kept_indices;
};

struct RunReport {
  HarnessConfig config;
  std::vector<WindowRecord> windows;
  std::vector<std::string> warnings;
  std::size_t dropped_steps = 0;
  bool scored_embeddings = false;

  std::size_t forwards = 0;  // T
  std::size_t pruned = 0;
  double gamma = 0.0;
  double rho_avg = 1.0;  // mean fraction of visual tokens processed per forward

  flops::ModelDims dims;
  flops::FlopCount base_per_forward = 0;
  flops::FlopCount adp_per_forward = 0;
  flops::FlopCount scoring_per_forward = 0;
  flops::Int128 base_total = 0;
  flops::Int128 episode_total = 0;
  flops::Int128 savings = 0;
  double speedup = 1.0;  // base_total / episode_total
};

// Optional vision inputs. `shared` is scored on every pruned window unless
// `per_window` is non-empty, in which case entry i - 1 is used for window i.
struct VisionInputs {
  std::optional<tokens::EmbeddingMatrix> shared;
  std::vector<tokens::EmbeddingMatrix> per_window;
  std::optional<tokens::ProjectionWeights> weights;

  bool present() const { return shared.has_value() || !per_window.empty(); }
};

// Replays the log through FK, the gate, token selection (when embeddings are
// given) and the cost model. Without embeddings pruning is count-only and the
// dims must carry sequence lengths.
RunReport run_episode(const episode::EpisodeLog& log, const HarnessConfig& config,
                      const VisionInputs& vision = {});

// Loads per-window embedding files named in the log header, relative to
// `base_dir`.
std::vector<tokens::EmbeddingMatrix> load_window_embeddings(const episode::EpisodeLog& log,
                                                            const std::filesystem::path& base_dir);

// Runs every *.jsonl file in `dir` (sorted by name) on `jobs` workers.
std::vector<std::pair<std::string, RunReport>> run_directory(const std::filesystem::path& dir,
                                                             const HarnessConfig& config,
                                                             const VisionInputs& vision,
                                                             std::size_t jobs);

struct RetentionRow {
  std::size_t kept = 0;        // k
  std::size_t windows = 0;     // pruned windows with this k
  double analytic = 0.0;       // P(all m targets survive uniform retention of k)
  double monte_carlo = 0.0;
  double monte_carlo_se = 0.0;
  // Windows whose ADP selection retained every target; set only when a
  // target mask and kept indices are available.
  std::optional<std::size_t> adp_full_retention_windows;
};

struct RandomComparison {
  std::uint64_t tokens = 0;   // V
  std::uint64_t targets = 0;  // m
  std::uint64_t trials = 0;
  std::vector<RetentionRow> rows;  // ascending k
};

RandomComparison compare_random(const RunReport& report, std::uint64_t tokens, std::uint64_t targets,
                                std::uint64_t trials, std::uint64_t seed = 0,
                                const std::vector<std::size_t>& target_mask = {});

// Report serialisation: fixed key order, floats at 6 significant digits,
// FLOP counts as exact integers plus a "tera" string at 2 decimals.
double round_sig6(double x);
nlohmann::ordered_json to_json(const RunReport& report);
nlohmann::ordered_json to_json(const RandomComparison& comparison);
nlohmann::ordered_json gate_report(const std::vector<double>& deltas, const gate::GateTrace& trace);
std::string int128_to_string(flops::Int128 v);

}  // namespace adp::harness
