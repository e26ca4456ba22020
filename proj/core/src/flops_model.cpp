#include "adp/flops_model.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "adp/errors.hpp"
#include "adp/token_scoring.hpp"

namespace adp::flops {

namespace {

__extension__ using U128 = unsigned __int128;

U128 mul(U128 a, U128 b) {
  U128 out = 0;
  if (__builtin_mul_overflow(a, b, &out)) throw RangeError("FLOP count overflows 128-bit accumulator");
  return out;
}

U128 add(U128 a, U128 b) {
  U128 out = 0;
  if (__builtin_add_overflow(a, b, &out)) throw RangeError("FLOP count overflows 128-bit accumulator");
  return out;
}

FlopCount narrow(U128 v) {
  if (v > static_cast<U128>(std::numeric_limits<FlopCount>::max())) {
    throw RangeError("FLOP count exceeds 2^63 - 1");
  }
  return static_cast<FlopCount>(v);
}

}  // namespace

std::uint64_t ModelDims::sequence_length() const {
  return 1 + l_vis + l_prop + l_txt + l_act + (eos ? 1 : 0);
}

std::uint64_t ModelDims::pruned_sequence_length(std::uint64_t kept) const {
  return 1 + kept + l_prop + l_txt + l_act + (eos ? 1 : 0);
}

void ModelDims::validate() const {
  if (hidden == 0 || intermediate == 0 || layers == 0 || num_heads == 0 || head_dim == 0) {
    throw InvalidArgument("model dims: D, M, H, num_heads and head_dim must be positive");
  }
  if (num_heads * head_dim != hidden) throw InvalidArgument("model dims: num_heads * head_dim != D");
  if (l_vis == 0) throw InvalidArgument("model dims: L_vis must be positive");
  if (l_txt == 0) throw InvalidArgument("model dims: L_txt must be positive");
}

ModelDims preset_dims(std::string_view name) {
  if (name == "llama2-7b-oft") {
    ModelDims d;
    d.hidden = 4096;
    d.intermediate = 11008;
    d.layers = 32;
    d.num_heads = 32;
    d.head_dim = 128;
    return d;
  }
  throw InvalidArgument("unknown dims preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() { return {"llama2-7b-oft"}; }

FlopCount layer_flops(std::uint64_t seq, std::uint64_t hidden, std::uint64_t intermediate) {
  if (seq == 0 || hidden == 0 || intermediate == 0) {
    throw InvalidArgument("layer_flops: dimensions must be positive");
  }
  const U128 s = seq, d = hidden, m = intermediate;
  const U128 attention = mul(mul(mul(2, s), s), d);
  const U128 projections = mul(mul(mul(4, s), d), d);
  const U128 mlp = mul(mul(mul(6, s), d), m);
  return narrow(add(add(attention, projections), mlp));
}

FlopCount baseline_flops(const ModelDims& dims) {
  dims.validate();
  const FlopCount layer = layer_flops(dims.sequence_length(), dims.hidden, dims.intermediate);
  return narrow(mul(dims.layers, static_cast<U128>(layer)));
}

FlopCount scoring_flops(const ModelDims& dims) {
  if (dims.hidden == 0 || dims.num_heads == 0 || dims.head_dim == 0) {
    throw InvalidArgument("scoring_flops: D, num_heads and head_dim must be positive");
  }
  const U128 d2 = mul(dims.hidden, dims.hidden);
  const U128 text = mul(mul(2, dims.l_txt), d2);
  const U128 vis = mul(mul(2, dims.l_vis), d2);
  const U128 sim = mul(mul(mul(mul(2, dims.num_heads), dims.l_txt), dims.l_vis), dims.head_dim);
  return narrow(add(add(text, vis), sim));
}

FlopCount adp_flops(const ModelDims& dims, double rho, std::uint64_t scoring_layer) {
  dims.validate();
  if (scoring_layer > dims.layers) throw InvalidArgument("adp_flops: scoring layer beyond H");
  const std::uint64_t kept = tokens::retained_count(rho, dims.l_vis);
  const U128 full = static_cast<U128>(layer_flops(dims.sequence_length(), dims.hidden, dims.intermediate));
  const U128 pruned =
      static_cast<U128>(layer_flops(dims.pruned_sequence_length(kept), dims.hidden, dims.intermediate));
  const U128 stack = add(mul(scoring_layer, full), mul(dims.layers - scoring_layer, pruned));
  return narrow(add(static_cast<U128>(scoring_flops(dims)), stack));
}

Fraction Fraction::from_double(double x, std::int64_t den) {
  if (!std::isfinite(x) || x < 0.0 || x > 1.0) throw InvalidArgument("fraction must lie in [0, 1]");
  if (den <= 0) throw InvalidArgument("fraction denominator must be positive");
  return {static_cast<std::int64_t>(std::llround(x * static_cast<double>(den))), den};
}

void Fraction::validate() const {
  if (den <= 0 || num < 0 || num > den) throw InvalidArgument("fraction must lie in [0, 1]");
}

double EpisodeCost::expected() const {
  return static_cast<double>(expected_scaled) / static_cast<double>(gamma.den);
}

double EpisodeCost::savings() const {
  return static_cast<double>(savings_scaled) / static_cast<double>(gamma.den);
}

EpisodeCost episode_expected_flops(const ModelDims& dims, double rho, Fraction gamma,
                                   std::int64_t forwards, std::uint64_t scoring_layer) {
  gamma.validate();
  if (forwards < 1) throw InvalidArgument("episode_expected_flops: T must be >= 1");
  EpisodeCost cost;
  cost.forwards = forwards;
  cost.gamma = gamma;
  cost.base_per_forward = baseline_flops(dims);
  cost.adp_per_forward = adp_flops(dims, rho, scoring_layer);
  const Int128 t = forwards;
  const Int128 pruned_weight = gamma.num;
  const Int128 full_weight = gamma.den - gamma.num;
  cost.expected_scaled = t * (pruned_weight * cost.adp_per_forward + full_weight * cost.base_per_forward);
  cost.savings_scaled = t * pruned_weight * (static_cast<Int128>(cost.base_per_forward) - cost.adp_per_forward);
  return cost;
}

std::string to_tera_string(double flops) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", flops / 1e12);
  return buf;
}

const char* to_string(CostInterpretation interpretation) {
  switch (interpretation) {
    case CostInterpretation::kPerForward: return "per_forward";
    case CostInterpretation::kEpisodeAverage: return "episode_average";
  }
  return "?";
}

}  // namespace adp::flops
