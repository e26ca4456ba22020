#include "adp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "adp/embedding_io.hpp"
#include "adp/errors.hpp"
#include "adp/score_stats.hpp"

namespace adp::harness {

namespace {

using tokens::EmbeddingMatrix;

// Fills sequence lengths from the embeddings, rejecting any explicit dims
// that disagree with them.
flops::ModelDims reconcile_dims(flops::ModelDims dims, const EmbeddingMatrix& emb,
                                const tokens::ProjectionWeights& weights) {
  using tokens::SegmentKind;
  const std::uint64_t l_vis = emb.vis_length();
  const std::uint64_t l_txt = emb.length_of(SegmentKind::kTxt);
  const std::uint64_t l_prop = emb.length_of(SegmentKind::kProp);
  const std::uint64_t l_act = emb.length_of(SegmentKind::kAct);
  if (dims.l_vis != 0) {
    if (dims.l_vis != l_vis || dims.l_txt != l_txt || dims.l_prop != l_prop || dims.l_act != l_act ||
        dims.eos != emb.has_eos()) {
      throw InvalidArgument("configured sequence lengths do not match the embedding layout");
    }
  }
  dims.l_vis = l_vis;
  dims.l_txt = l_txt;
  dims.l_prop = l_prop;
  dims.l_act = l_act;
  dims.eos = emb.has_eos();
  if (dims.hidden != emb.cols()) {
    throw InvalidArgument("dims.hidden = " + std::to_string(dims.hidden) + " but embeddings have width " +
                          std::to_string(emb.cols()));
  }
  if (weights.width() != emb.cols() || dims.num_heads != weights.num_heads ||
      dims.head_dim != weights.head_dim) {
    throw InvalidArgument("projection weights do not match dims (width, num_heads, head_dim)");
  }
  return dims;
}

bool same_lengths(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  using tokens::SegmentKind;
  return a.cols() == b.cols() && a.view_lengths() == b.view_lengths() &&
         a.length_of(SegmentKind::kTxt) == b.length_of(SegmentKind::kTxt) &&
         a.length_of(SegmentKind::kProp) == b.length_of(SegmentKind::kProp) &&
         a.length_of(SegmentKind::kAct) == b.length_of(SegmentKind::kAct) && a.has_eos() == b.has_eos();
}

}  // namespace

RunReport run_episode(const episode::EpisodeLog& log, const HarnessConfig& config, const VisionInputs& vision) {
  config.validate();
  if (log.meta.omega != config.gate.omega) {
    throw InvalidArgument("episode omega " + std::to_string(log.meta.omega) + " != configured omega " +
                          std::to_string(config.gate.omega));
  }
  const std::size_t t = log.window_count();
  if (t == 0) throw InvalidArgument("episode has no complete window");

  RunReport report;
  report.config = config;
  report.warnings = log.warnings;
  report.dropped_steps = log.dropped_steps();
  report.scored_embeddings = vision.present();

  flops::ModelDims dims = config.dims;
  const EmbeddingMatrix* reference = nullptr;
  if (vision.present()) {
    if (!vision.weights) throw InvalidArgument("embeddings given without projection weights");
    if (!vision.per_window.empty() && vision.per_window.size() < t) {
      throw InvalidArgument("episode has " + std::to_string(t) + " windows but only " +
                            std::to_string(vision.per_window.size()) + " embedding files");
    }
    reference = vision.per_window.empty() ? &*vision.shared : &vision.per_window.front();
    for (const auto& emb : vision.per_window) {
      if (!same_lengths(emb, *reference)) {
        throw InvalidArgument("per-window embeddings must share one segment layout");
      }
    }
    dims = reconcile_dims(dims, *reference, *vision.weights);
  }
  if (dims.l_vis == 0 || dims.l_txt == 0) {
    throw InvalidArgument("sequence lengths (dims.l_vis, dims.l_txt, ...) are required without embeddings");
  }
  dims.validate();
  report.dims = dims;

  std::vector<double> alpha = config.alpha;
  if (alpha.empty()) alpha = tokens::default_alpha(reference ? reference->view_lengths().size() : 1);

  gate::MotionGate gate(config.gate);
  double vis_fraction_sum = 0.0;
  report.windows.reserve(t);
  for (std::size_t i = 1; i <= t; ++i) {
    WindowRecord rec;
    rec.index = i;
    rec.delta = kin::window_distance(log.window(i), config.kinematics);
    rec.decision = gate.observe(rec.delta);
    if (rec.decision == gate::VisionState::kPruned) {
      ++report.pruned;
      if (vision.present()) {
        const auto& emb = vision.per_window.empty() ? *vision.shared : vision.per_window[i - 1];
        auto result = tokens::prune_pipeline(emb, *vision.weights, config.rho, alpha);
        rec.kept = result.decision.k;
        rec.kept_indices = result.decision.flat_kept();
      } else {
        rec.kept = tokens::retained_count(config.rho, dims.l_vis);
      }
      vis_fraction_sum += static_cast<double>(rec.kept) / static_cast<double>(dims.l_vis);
    } else {
      vis_fraction_sum += 1.0;
    }
    report.windows.push_back(std::move(rec));
  }

  report.forwards = t;
  report.gamma = static_cast<double>(report.pruned) / static_cast<double>(t);
  report.rho_avg = vis_fraction_sum / static_cast<double>(t);

  report.base_per_forward = flops::baseline_flops(dims);
  report.adp_per_forward = flops::adp_flops(dims, config.rho, config.scoring_layer);
  report.scoring_per_forward = flops::scoring_flops(dims);
  const flops::Int128 full = static_cast<flops::Int128>(t - report.pruned);
  report.base_total = static_cast<flops::Int128>(t) * report.base_per_forward;
  report.episode_total =
      static_cast<flops::Int128>(report.pruned) * report.adp_per_forward + full * report.base_per_forward;
  report.savings = report.base_total - report.episode_total;
  report.speedup = static_cast<double>(report.base_total) / static_cast<double>(report.episode_total);
  return report;
}

std::vector<EmbeddingMatrix> load_window_embeddings(const episode::EpisodeLog& log,
                                                    const std::filesystem::path& base_dir) {
  std::vector<EmbeddingMatrix> out;
  out.reserve(log.meta.embedding_files.size());
  for (const auto& f : log.meta.embedding_files) {
    std::filesystem::path p(f);
    if (p.is_relative()) p = base_dir / p;
    out.push_back(io::read_embeddings(p));
  }
  return out;
}

std::vector<std::pair<std::string, RunReport>> run_directory(const std::filesystem::path& dir,
                                                             const HarnessConfig& config,
                                                             const VisionInputs& vision, std::size_t jobs) {
  if (!std::filesystem::is_directory(dir)) throw InvalidArgument(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<std::optional<RunReport>> results(files.size());
  std::vector<std::exception_ptr> errors(files.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) {
      try {
        const auto log = episode::load_episode(files[i], config.gate.omega);
        VisionInputs local;
        const VisionInputs* inputs = &vision;
        if (!log.meta.embedding_files.empty()) {
          local.per_window = load_window_embeddings(log, files[i].parent_path());
          local.weights = vision.weights;
          inputs = &local;
        }
        results[i] = run_episode(log, config, *inputs);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t n = std::max<std::size_t>(1, std::min(jobs, files.size()));
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(worker);
  }
  std::vector<std::pair<std::string, RunReport>> out;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.emplace_back(files[i].filename().string(), std::move(*results[i]));
  }
  return out;
}

RandomComparison compare_random(const RunReport& report, std::uint64_t tokens, std::uint64_t targets,
                                std::uint64_t trials, std::uint64_t seed,
                                const std::vector<std::size_t>& target_mask) {
  if (!target_mask.empty()) {
    if (targets != target_mask.size()) {
      throw InvalidArgument("compare_random: m must equal the target mask size");
    }
    for (std::size_t idx : target_mask) {
      if (idx >= tokens) throw InvalidArgument("compare_random: target index outside [0, V)");
    }
  }
  if (targets > tokens) throw InvalidArgument("compare_random: m > V");
  if (trials == 0) throw InvalidArgument("compare_random: trials must be positive");

  std::map<std::size_t, std::vector<const WindowRecord*>> by_k;
  for (const auto& w : report.windows) {
    if (w.decision == gate::VisionState::kPruned) by_k[w.kept].push_back(&w);
  }
  RandomComparison out;
  out.tokens = tokens;
  out.targets = targets;
  out.trials = trials;
  for (const auto& [k, windows] : by_k) {
    if (k > tokens) throw InvalidArgument("compare_random: kept count exceeds V");
    RetentionRow row;
    row.kept = k;
    row.windows = windows.size();
    row.analytic = stats::random_retention_probability(tokens, targets, k, targets);
    const auto mc = stats::simulate_random_retention(tokens, targets, k, targets, trials, seed + k);
    row.monte_carlo = mc.probability;
    row.monte_carlo_se = mc.standard_error;
    if (!target_mask.empty() && report.scored_embeddings) {
      std::size_t full = 0;
      for (const WindowRecord* w : windows) {
        const bool all = std::all_of(target_mask.begin(), target_mask.end(), [&](std::size_t idx) {
          return std::binary_search(w->kept_indices.begin(), w->kept_indices.end(), idx);
        });
        if (all) ++full;
      }
      row.adp_full_retention_windows = full;
    }
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace adp::harness
