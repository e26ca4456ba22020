#include "adp/config.hpp"

#include <cmath>

#include "adp/errors.hpp"

#ifndef ADP_VERSION_STRING
#define ADP_VERSION_STRING "0.0.0"
#endif

namespace adp {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw SchemaError("config field '" + field + "': " + what, 0, field);
}

std::uint64_t get_uint(const json& j, const std::string& field) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
    fail(field, "expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

double get_double(const json& j, const std::string& field) {
  if (!j.is_number()) fail(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(field, "expected a finite number");
  return v;
}

std::string get_string(const json& j, const std::string& field) {
  if (!j.is_string()) fail(field, "expected a string");
  return j.get<std::string>();
}

template <typename Parse>
auto get_enum(const json& j, const std::string& field, Parse parse) {
  const std::string s = get_string(j, field);
  try {
    return parse(s);
  } catch (const InvalidArgument& e) {
    fail(field, e.what());
  }
}

void parse_dims(const json& j, flops::ModelDims& dims) {
  if (!j.is_object()) fail("dims", "expected an object");
  for (const auto& [key, value] : j.items()) {
    const std::string field = "dims." + key;
    if (key == "hidden") dims.hidden = get_uint(value, field);
    else if (key == "intermediate") dims.intermediate = get_uint(value, field);
    else if (key == "layers") dims.layers = get_uint(value, field);
    else if (key == "num_heads") dims.num_heads = get_uint(value, field);
    else if (key == "head_dim") dims.head_dim = get_uint(value, field);
    else if (key == "l_vis") dims.l_vis = get_uint(value, field);
    else if (key == "l_txt") dims.l_txt = get_uint(value, field);
    else if (key == "l_prop") dims.l_prop = get_uint(value, field);
    else if (key == "l_act") dims.l_act = get_uint(value, field);
    else if (key == "eos") {
      if (!value.is_boolean()) fail(field, "expected a boolean");
      dims.eos = value.get<bool>();
    } else {
      fail(field, "unknown key");
    }
  }
}

}  // namespace

const char* version() { return ADP_VERSION_STRING; }

void HarnessConfig::validate() const {
  try {
    gate.validate();
  } catch (const InvalidArgument& e) {
    throw SchemaError(e.what(), 0, "gate");
  }
  if (!(rho > 0.0 && rho <= 1.0)) fail("rho", "must lie in (0, 1]");
  if (!alpha.empty()) {
    double sum = 0.0;
    for (double a : alpha) {
      if (!std::isfinite(a) || a < 0.0) fail("alpha", "entries must be finite and >= 0");
      sum += a;
    }
    if (std::abs(sum - 1.0) > 1e-9) fail("alpha", "entries must sum to 1");
  }
  if (dims.layers != 0 && scoring_layer > dims.layers) fail("scoring_layer", "exceeds layer count");
  if (dims.num_heads * dims.head_dim != dims.hidden) fail("dims", "num_heads * head_dim != hidden");
}

bool HarnessConfig::operator==(const HarnessConfig& o) const {
  const auto& a = gate;
  const auto& b = o.gate;
  const bool gate_eq = a.rule == b.rule && a.tau == b.tau && a.third_case == b.third_case &&
                       a.cold_start_windows == b.cold_start_windows &&
                       a.max_consecutive_pruned == b.max_consecutive_pruned && a.omega == b.omega;
  const auto& d = dims;
  const auto& e = o.dims;
  const bool dims_eq = d.hidden == e.hidden && d.intermediate == e.intermediate && d.layers == e.layers &&
                       d.num_heads == e.num_heads && d.head_dim == e.head_dim && d.l_vis == e.l_vis &&
                       d.l_txt == e.l_txt && d.l_prop == e.l_prop && d.l_act == e.l_act && d.eos == e.eos;
  return gate_eq && dims_eq && rho == o.rho && alpha == o.alpha && scoring_layer == o.scoring_layer &&
         dims_preset == o.dims_preset && kinematics.order == o.kinematics.order &&
         kinematics.frame == o.kinematics.frame;
}

HarnessConfig parse_config(const nlohmann::json& j, HarnessConfig c) {
  if (!j.is_object()) fail("<root>", "expected a JSON object");

  // Preset first so explicit dims override it regardless of key order.
  if (j.contains("dims_preset")) {
    const auto& v = j.at("dims_preset");
    if (v.is_null()) {
      c.dims_preset.clear();
    } else {
      c.dims_preset = get_string(v, "dims_preset");
      flops::ModelDims widths;
      try {
        widths = flops::preset_dims(c.dims_preset);
      } catch (const InvalidArgument& e) {
        fail("dims_preset", e.what());
      }
      c.dims.hidden = widths.hidden;
      c.dims.intermediate = widths.intermediate;
      c.dims.layers = widths.layers;
      c.dims.num_heads = widths.num_heads;
      c.dims.head_dim = widths.head_dim;
    }
  }

  for (const auto& [key, value] : j.items()) {
    if (key == "rule") c.gate.rule = get_enum(value, key, parse_rule);
    else if (key == "tau") c.gate.tau = get_uint(value, key);
    else if (key == "third_case") c.gate.third_case = get_enum(value, key, parse_third_case);
    else if (key == "cold_start_windows") c.gate.cold_start_windows = get_uint(value, key);
    else if (key == "max_consecutive_pruned") c.gate.max_consecutive_pruned = get_uint(value, key);
    else if (key == "omega") c.gate.omega = get_uint(value, key);
    else if (key == "rho") c.rho = get_double(value, key);
    else if (key == "alpha") {
      if (!value.is_array()) fail(key, "expected an array of numbers");
      c.alpha.clear();
      for (std::size_t i = 0; i < value.size(); ++i) {
        c.alpha.push_back(get_double(value[i], "alpha[" + std::to_string(i) + "]"));
      }
    } else if (key == "scoring_layer") c.scoring_layer = get_uint(value, key);
    else if (key == "dims_preset") continue;
    else if (key == "dims") parse_dims(value, c.dims);
    else if (key == "euler_order") c.kinematics.order = get_enum(value, key, parse_euler_order);
    else if (key == "composition") c.kinematics.frame = get_enum(value, key, parse_composition);
    else fail(key, "unknown key");
  }

  if (c.gate.tau < 1) fail("tau", "must be >= 1");
  if (c.gate.max_consecutive_pruned < 1) fail("max_consecutive_pruned", "must be >= 1");
  if (c.gate.omega < 1) fail("omega", "must be >= 1");
  c.validate();
  return c;
}

HarnessConfig parse_config_text(const std::string& text, HarnessConfig base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j, std::move(base));
}

nlohmann::ordered_json to_json(const HarnessConfig& c) {
  nlohmann::ordered_json j;
  j["rule"] = to_string(c.gate.rule);
  j["tau"] = c.gate.tau;
  j["third_case"] = to_string(c.gate.third_case);
  j["cold_start_windows"] = c.gate.cold_start_windows;
  j["max_consecutive_pruned"] = c.gate.max_consecutive_pruned;
  j["omega"] = c.gate.omega;
  j["rho"] = c.rho;
  j["alpha"] = c.alpha;
  j["scoring_layer"] = c.scoring_layer;
  j["dims_preset"] = c.dims_preset.empty() ? nlohmann::ordered_json(nullptr)
                                           : nlohmann::ordered_json(c.dims_preset);
  nlohmann::ordered_json dims;
  dims["hidden"] = c.dims.hidden;
  dims["intermediate"] = c.dims.intermediate;
  dims["layers"] = c.dims.layers;
  dims["num_heads"] = c.dims.num_heads;
  dims["head_dim"] = c.dims.head_dim;
  dims["l_vis"] = c.dims.l_vis;
  dims["l_txt"] = c.dims.l_txt;
  dims["l_prop"] = c.dims.l_prop;
  dims["l_act"] = c.dims.l_act;
  dims["eos"] = c.dims.eos;
  j["dims"] = std::move(dims);
  j["euler_order"] = to_string(c.kinematics.order);
  j["composition"] = to_string(c.kinematics.frame);
  return j;
}

const char* to_string(gate::Rule rule) { return rule == gate::Rule::kMean ? "mean" : "extrema"; }

const char* to_string(gate::ThirdCase t) {
  return t == gate::ThirdCase::kInherit ? "inherit" : "force_prune";
}

const char* to_string(kin::EulerOrder order) {
  switch (order) {
    case kin::EulerOrder::kXYZ: return "xyz";
    case kin::EulerOrder::kXZY: return "xzy";
    case kin::EulerOrder::kYXZ: return "yxz";
    case kin::EulerOrder::kYZX: return "yzx";
    case kin::EulerOrder::kZXY: return "zxy";
    case kin::EulerOrder::kZYX: return "zyx";
  }
  return "?";
}

const char* to_string(kin::CompositionFrame frame) {
  return frame == kin::CompositionFrame::kBody ? "body" : "world";
}

gate::Rule parse_rule(const std::string& s) {
  if (s == "mean") return gate::Rule::kMean;
  if (s == "extrema") return gate::Rule::kExtrema;
  throw InvalidArgument("unknown rule '" + s + "' (expected mean|extrema)");
}

gate::ThirdCase parse_third_case(const std::string& s) {
  if (s == "inherit") return gate::ThirdCase::kInherit;
  if (s == "force_prune") return gate::ThirdCase::kForcePrune;
  throw InvalidArgument("unknown third_case '" + s + "' (expected inherit|force_prune)");
}

kin::EulerOrder parse_euler_order(const std::string& s) {
  for (auto o : {kin::EulerOrder::kXYZ, kin::EulerOrder::kXZY, kin::EulerOrder::kYXZ, kin::EulerOrder::kYZX,
                 kin::EulerOrder::kZXY, kin::EulerOrder::kZYX}) {
    if (s == to_string(o)) return o;
  }
  throw InvalidArgument("unknown euler_order '" + s + "'");
}

kin::CompositionFrame parse_composition(const std::string& s) {
  if (s == "body") return kin::CompositionFrame::kBody;
  if (s == "world") return kin::CompositionFrame::kWorld;
  throw InvalidArgument("unknown composition '" + s + "' (expected body|world)");
}

}  // namespace adp
