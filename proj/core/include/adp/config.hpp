#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adp/flops_model.hpp"
#include "adp/motion_gate.hpp"
#include "adp/se3_kinematics.hpp"

namespace adp {

// Library version, also reported by the CLI.
const char* version();

// Everything a replay needs besides the log itself. Maps 1:1 onto the JSON
// config keys:
//   rule, tau, third_case, cold_start_windows, max_consecutive_pruned, omega,
//   rho, alpha, scoring_layer, dims_preset, dims{...}, euler_order, composition
struct HarnessConfig {
  gate::GateConfig gate;
  double rho = 0.5;
  std::vector<double> alpha;  // empty: tokens::default_alpha(view count)
  std::uint64_t scoring_layer = 0;
  std::string dims_preset = "llama2-7b-oft";  // empty: no preset
  flops::ModelDims dims = flops::preset_dims("llama2-7b-oft");
  kin::KinematicsConfig kinematics;

  // Cross-field checks (rho range, alpha sums, gate invariants).
  void validate() const;
  bool operator==(const HarnessConfig& other) const;
};

// Parses a config object. Keys absent from `json` keep the values already in
// `base`. Throws SchemaError naming the offending field ("/gate/tau" style
// paths are flattened to the key name, e.g. "tau" or "dims.l_vis").
HarnessConfig parse_config(const nlohmann::json& json, HarnessConfig base = {});
HarnessConfig parse_config_text(const std::string& text, HarnessConfig base = {});

// Emits every key; parse_config(to_json(c)) == c.
nlohmann::ordered_json to_json(const HarnessConfig& config);

const char* to_string(gate::Rule rule);
const char* to_string(gate::ThirdCase third_case);
const char* to_string(kin::EulerOrder order);
const char* to_string(kin::CompositionFrame frame);

gate::Rule parse_rule(const std::string& s);
gate::ThirdCase parse_third_case(const std::string& s);
kin::EulerOrder parse_euler_order(const std::string& s);
kin::CompositionFrame parse_composition(const std::string& s);

}  // namespace adp
