#include <algorithm>
#include <cmath>
#include <limits>

#include "adp/errors.hpp"
#include "adp/flops_model.hpp"
#include "adp/token_scoring.hpp"

namespace adp::flops {

CalibrationTarget CalibrationTarget::libero_oft() {
  return {{0.3, 0.4, 0.5, 0.6, 0.7}, {5.85, 6.14, 6.43, 6.74, 7.03}, 7.91};
}

namespace {

struct Candidate {
  double max_error = std::numeric_limits<double>::infinity();
  double sum_sq = std::numeric_limits<double>::infinity();
  std::uint64_t l_vis = 0;
  std::uint64_t l_other = 0;
  double gamma = 1.0;

  bool better_than(const Candidate& o) const {
    if (max_error != o.max_error) return max_error < o.max_error;
    return sum_sq < o.sum_sq;
  }
};

ModelDims with_lengths(const ModelDims& widths, std::uint64_t l_vis, std::uint64_t l_other) {
  ModelDims d = widths;
  d.l_vis = l_vis;
  d.l_txt = l_other;
  d.l_prop = 0;
  d.l_act = 0;
  d.eos = true;
  return d;
}

CalibrationFit materialize(const ModelDims& widths, const CalibrationTarget& target,
                           const Candidate& c, CostInterpretation interpretation) {
  CalibrationFit fit;
  fit.interpretation = interpretation;
  fit.l_vis = c.l_vis;
  fit.l_other = c.l_other;
  fit.gamma = c.gamma;
  const ModelDims dims = with_lengths(widths, c.l_vis, c.l_other);
  const double base = static_cast<double>(baseline_flops(dims));
  fit.model_base_tera = base / 1e12;
  fit.base_relative_error = (fit.model_base_tera - target.base_tera_flops) / target.base_tera_flops;
  fit.max_relative_error = std::abs(fit.base_relative_error);
  for (std::size_t i = 0; i < target.rhos.size(); ++i) {
    const double adp = static_cast<double>(adp_flops(dims, target.rhos[i]));
    const double model = (c.gamma * adp + (1.0 - c.gamma) * base) / 1e12;
    const double err = (model - target.tera_flops[i]) / target.tera_flops[i];
    fit.model_tera.push_back(model);
    fit.relative_error.push_back(err);
    fit.max_relative_error = std::max(fit.max_relative_error, std::abs(err));
  }
  return fit;
}

}  // namespace

CalibrationReport calibrate(const ModelDims& widths, const CalibrationTarget& target,
                            const CalibrationSearch& search) {
  if (target.rhos.empty() || target.rhos.size() != target.tera_flops.size()) {
    throw InvalidArgument("calibrate: rho and FLOPs columns must be non-empty and equal length");
  }
  if (target.base_tera_flops <= 0.0) throw InvalidArgument("calibrate: base FLOPs must be positive");
  if (search.min_l_vis < 1 || search.max_l_vis < search.min_l_vis || search.gamma_steps < 1) {
    throw InvalidArgument("calibrate: invalid search bounds");
  }

  const double base_target = target.base_tera_flops * 1e12;
  const std::size_t n = target.rhos.size();
  Candidate best_forward;
  Candidate best_episode;
  std::vector<double> adp(n);

  for (std::uint64_t l_vis = search.min_l_vis; l_vis <= search.max_l_vis; ++l_vis) {
    // Baseline cost is increasing in S, so scan the window of total lengths
    // whose baseline lands near the target.
    for (std::uint64_t l_other = 1;; ++l_other) {
      const ModelDims dims = with_lengths(widths, l_vis, l_other);
      const double base = static_cast<double>(baseline_flops(dims));
      const double base_err = (base - base_target) / base_target;
      if (base_err > search.base_window) break;
      if (base_err < -search.base_window) continue;

      bool valid = true;
      for (std::size_t i = 0; i < n; ++i) {
        if (tokens::retained_count(target.rhos[i], l_vis) == 0) {
          valid = false;
          break;
        }
        adp[i] = static_cast<double>(adp_flops(dims, target.rhos[i]));
      }
      if (!valid) continue;

      auto score = [&](double gamma) {
        Candidate c;
        c.l_vis = l_vis;
        c.l_other = l_other;
        c.gamma = gamma;
        c.max_error = std::abs(base_err);
        c.sum_sq = base_err * base_err;
        for (std::size_t i = 0; i < n; ++i) {
          const double model = gamma * adp[i] + (1.0 - gamma) * base;
          const double target_i = target.tera_flops[i] * 1e12;
          const double err = (model - target_i) / target_i;
          c.max_error = std::max(c.max_error, std::abs(err));
          c.sum_sq += err * err;
        }
        return c;
      };

      const Candidate forward = score(1.0);
      if (forward.better_than(best_forward)) best_forward = forward;
      for (std::uint32_t g = 0; g <= search.gamma_steps; ++g) {
        const Candidate episode = score(static_cast<double>(g) / search.gamma_steps);
        if (episode.better_than(best_episode)) best_episode = episode;
      }
    }
  }
  if (best_forward.l_vis == 0) throw DegenerateInput("calibrate: no candidate within the base window");

  CalibrationReport report;
  report.per_forward = materialize(widths, target, best_forward, CostInterpretation::kPerForward);
  report.episode_average = materialize(widths, target, best_episode, CostInterpretation::kEpisodeAverage);
  return report;
}

}  // namespace adp::flops
