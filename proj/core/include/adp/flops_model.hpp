#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace adp::flops {

// FLOP counts are exact integers. Intermediate products are evaluated in
// 128 bits; any result above INT64_MAX raises RangeError.
using FlopCount = std::int64_t;
__extension__ using Int128 = __int128;

struct ModelDims {
  std::uint64_t hidden = 0;        // D
  std::uint64_t intermediate = 0;  // M (SwiGLU width)
  std::uint64_t layers = 0;        // H
  std::uint64_t num_heads = 0;     // N^h
  std::uint64_t head_dim = 0;      // d
  std::uint64_t l_vis = 0;
  std::uint64_t l_txt = 0;
  std::uint64_t l_prop = 0;
  std::uint64_t l_act = 0;
  bool eos = true;

  // S = 1 + L_vis + L_prop + L_txt + L_act (+ 1 with EOS)
  std::uint64_t sequence_length() const;
  // S' for k retained visual tokens.
  std::uint64_t pruned_sequence_length(std::uint64_t kept) const;

  // Widths positive, num_heads * head_dim == hidden, L_vis and L_txt positive.
  void validate() const;
};

// Width-only presets; sequence lengths stay zero and must be supplied.
ModelDims preset_dims(std::string_view name);
std::vector<std::string> preset_names();

// 2 S^2 D + 4 S D^2 + 6 S D M for one transformer layer.
FlopCount layer_flops(std::uint64_t seq, std::uint64_t hidden, std::uint64_t intermediate);

FlopCount baseline_flops(const ModelDims& dims);

// 2 L_txt D^2 + 2 L_vis D^2 + 2 N^h L_txt L_vis d.
FlopCount scoring_flops(const ModelDims& dims);

// Scoring plus the stack on the pruned sequence. With scoring_layer l > 0 the
// first l layers still run on the full sequence; l = 0 is the default.
FlopCount adp_flops(const ModelDims& dims, double rho, std::uint64_t scoring_layer = 0);

// Exact fraction num / den with 0 <= num <= den, den > 0.
struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  // Rounds x to the nearest multiple of 1/den.
  static Fraction from_double(double x, std::int64_t den = 1'000'000);
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  void validate() const;
};

struct EpisodeCost {
  std::int64_t forwards = 0;
  Fraction gamma;
  FlopCount base_per_forward = 0;
  FlopCount adp_per_forward = 0;
  // T (gamma F_ADP + (1 - gamma) F_base) and T gamma (F_base - F_ADP), both
  // multiplied by gamma.den so they stay integral.
  Int128 expected_scaled = 0;
  Int128 savings_scaled = 0;

  Int128 base_total() const { return static_cast<Int128>(forwards) * base_per_forward; }
  double expected() const;
  double savings() const;
};

EpisodeCost episode_expected_flops(const ModelDims& dims, double rho, Fraction gamma,
                                   std::int64_t forwards, std::uint64_t scoring_layer = 0);

// FLOPs rendered in units of 1e12 with two decimals, e.g. "7.91".
std::string to_tera_string(double flops);

// ---------------------------------------------------------------------------
// Fitting the cost model to a published FLOPs column.

enum class CostInterpretation {
  kPerForward,      // reported value = F_ADP(rho)
  kEpisodeAverage,  // reported value = gamma F_ADP(rho) + (1 - gamma) F_base
};

const char* to_string(CostInterpretation interpretation);

struct CalibrationTarget {
  std::vector<double> rhos;
  std::vector<double> tera_flops;  // per rho, units of 1e12
  double base_tera_flops = 0.0;

  // FLOPs column of the LIBERO OpenVLA-OFT comparison.
  static CalibrationTarget libero_oft();
};

struct CalibrationSearch {
  std::uint64_t min_l_vis = 1;
  std::uint64_t max_l_vis = 2048;
  double base_window = 0.10;  // only (L_vis, L_other) with base within this rel. error
  std::uint32_t gamma_steps = 200;
};

struct CalibrationFit {
  CostInterpretation interpretation = CostInterpretation::kPerForward;
  std::uint64_t l_vis = 0;
  std::uint64_t l_other = 0;  // L_txt + L_prop + L_act, charged as text for scoring
  double gamma = 1.0;
  double model_base_tera = 0.0;
  std::vector<double> model_tera;      // per rho
  std::vector<double> relative_error;  // per rho, signed (model - target) / target
  double base_relative_error = 0.0;
  double max_relative_error = 0.0;     // over the rho points and the base
};

struct CalibrationReport {
  CalibrationFit per_forward;
  CalibrationFit episode_average;

  const CalibrationFit& best() const {
    return episode_average.max_relative_error < per_forward.max_relative_error ? episode_average
                                                                               : per_forward;
  }
};

// Grid search over (L_vis, L_other) and, for the episode-average reading, gamma.
// `widths` supplies D, M, H, N^h, d; its sequence lengths are ignored.
CalibrationReport calibrate(const ModelDims& widths, const CalibrationTarget& target,
                            const CalibrationSearch& search = {});

}  // namespace adp::flops
