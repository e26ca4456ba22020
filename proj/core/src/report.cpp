#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <string>

#include "adp/harness.hpp"

namespace adp::harness {

namespace {

using Json = nlohmann::ordered_json;

// Integers that fit in int64 are emitted as JSON numbers, larger ones as
// exact decimal strings.
Json flop_value(flops::Int128 v) {
  if (v >= std::numeric_limits<std::int64_t>::min() && v <= std::numeric_limits<std::int64_t>::max()) {
    return static_cast<std::int64_t>(v);
  }
  return int128_to_string(v);
}

Json dims_json(const flops::ModelDims& d) {
  Json j;
  j["hidden"] = d.hidden;
  j["intermediate"] = d.intermediate;
  j["layers"] = d.layers;
  j["num_heads"] = d.num_heads;
  j["head_dim"] = d.head_dim;
  j["l_vis"] = d.l_vis;
  j["l_txt"] = d.l_txt;
  j["l_prop"] = d.l_prop;
  j["l_act"] = d.l_act;
  j["eos"] = d.eos;
  j["sequence_length"] = d.sequence_length();
  return j;
}

}  // namespace

std::string int128_to_string(flops::Int128 v) {
  if (v == 0) return "0";
  const bool negative = v < 0;
  std::string digits;
  while (v != 0) {
    const int r = static_cast<int>(v % 10);
    digits.insert(digits.begin(), static_cast<char>('0' + (negative ? -r : r)));
    v /= 10;
  }
  return negative ? "-" + digits : digits;
}

double round_sig6(double x) {
  if (x == 0.0 || !std::isfinite(x)) return x;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return std::strtod(buf, nullptr);
}

Json to_json(const RunReport& r) {
  Json j;
  j["adp_version"] = version();
  j["config"] = adp::to_json(r.config);
  j["dims"] = dims_json(r.dims);
  j["scored_embeddings"] = r.scored_embeddings;
  j["dropped_steps"] = r.dropped_steps;
  j["warnings"] = r.warnings;

  Json windows = Json::array();
  for (const auto& w : r.windows) {
    Json rec;
    rec["index"] = w.index;
    rec["delta"] = round_sig6(w.delta);
    rec["decision"] = gate::to_int(w.decision);
    rec["kept"] = w.kept;
    if (!w.kept_indices.empty()) rec["kept_indices"] = w.kept_indices;
    windows.push_back(std::move(rec));
  }
  j["windows"] = std::move(windows);

  Json agg;
  agg["forwards"] = r.forwards;
  agg["pruned"] = r.pruned;
  agg["full"] = r.forwards - r.pruned;
  agg["gamma"] = round_sig6(r.gamma);
  agg["rho_avg"] = round_sig6(r.rho_avg);
  agg["speedup"] = round_sig6(r.speedup);
  j["aggregates"] = std::move(agg);

  Json f;
  f["base_per_forward"] = r.base_per_forward;
  f["adp_per_forward"] = r.adp_per_forward;
  f["scoring_per_forward"] = r.scoring_per_forward;
  f["base_total"] = flop_value(r.base_total);
  f["episode_total"] = flop_value(r.episode_total);
  f["savings"] = flop_value(r.savings);
  f["base_per_forward_tera"] = flops::to_tera_string(static_cast<double>(r.base_per_forward));
  f["adp_per_forward_tera"] = flops::to_tera_string(static_cast<double>(r.adp_per_forward));
  f["episode_mean_tera"] = flops::to_tera_string(static_cast<double>(r.episode_total) /
                                                 static_cast<double>(r.forwards));
  j["flops"] = std::move(f);
  return j;
}

Json to_json(const RandomComparison& c) {
  Json j;
  j["tokens"] = c.tokens;
  j["targets"] = c.targets;
  j["trials"] = c.trials;
  Json rows = Json::array();
  for (const auto& row : c.rows) {
    Json r;
    r["kept"] = row.kept;
    r["windows"] = row.windows;
    r["analytic"] = round_sig6(row.analytic);
    r["monte_carlo"] = round_sig6(row.monte_carlo);
    r["monte_carlo_se"] = round_sig6(row.monte_carlo_se);
    if (row.adp_full_retention_windows) r["adp_full_retention_windows"] = *row.adp_full_retention_windows;
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j;
}

Json gate_report(const std::vector<double>& deltas, const gate::GateTrace& trace) {
  Json j;
  Json windows = Json::array();
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    Json rec;
    rec["index"] = i + 1;
    rec["delta"] = round_sig6(deltas[i]);
    rec["decision"] = gate::to_int(trace.decisions[i]);
    windows.push_back(std::move(rec));
  }
  j["windows"] = std::move(windows);
  j["forwards"] = trace.decisions.size();
  j["pruned"] = trace.pruned;
  j["gamma"] = round_sig6(trace.gamma);
  return j;
}

}  // namespace adp::harness
