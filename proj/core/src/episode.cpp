#include "adp/episode.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "adp/errors.hpp"

namespace adp::episode {

namespace {

using nlohmann::json;

void parse_meta(const json& meta, std::size_t line, EpisodeMeta& out) {
  if (!meta.is_object()) throw SchemaError("\"meta\" must be an object", line, "meta");
  for (const auto& [key, value] : meta.items()) {
    if (key == "omega") {
      if (!value.is_number_integer() || value.get<std::int64_t>() < 1) {
        throw SchemaError("meta.omega must be a positive integer", line, "meta.omega");
      }
      out.omega = value.get<std::size_t>();
    } else if (key == "angle_unit") {
      const std::string unit = value.is_string() ? value.get<std::string>() : "";
      if (unit == "rad") {
        out.angle_unit = AngleUnit::kRadians;
      } else if (unit == "deg") {
        out.angle_unit = AngleUnit::kDegrees;
      } else {
        throw SchemaError("meta.angle_unit must be \"rad\" or \"deg\"", line, "meta.angle_unit");
      }
    } else if (key == "embedding_files") {
      if (!value.is_array()) throw SchemaError("meta.embedding_files must be an array", line, key);
      for (const auto& f : value) {
        if (!f.is_string()) throw SchemaError("meta.embedding_files entries must be strings", line, key);
        out.embedding_files.push_back(f.get<std::string>());
      }
    } else {
      throw SchemaError("unknown meta key '" + key + "'", line, "meta." + key);
    }
  }
}

}  // namespace

kin::ActionWindow EpisodeLog::window(std::size_t index) const {
  if (index < 1 || index > window_count()) throw InvalidArgument("window index out of range");
  kin::ActionWindow w;
  w.index = index;
  const auto begin = steps.begin() + static_cast<std::ptrdiff_t>((index - 1) * meta.omega);
  w.increments.assign(begin, begin + static_cast<std::ptrdiff_t>(meta.omega));
  return w;
}

std::vector<kin::ActionWindow> EpisodeLog::windows() const {
  std::vector<kin::ActionWindow> out;
  out.reserve(window_count());
  for (std::size_t i = 1; i <= window_count(); ++i) out.push_back(window(i));
  return out;
}

EpisodeLog parse_episode(std::istream& in, std::size_t default_omega) {
  if (default_omega < 1) throw InvalidArgument("omega must be >= 1");
  EpisodeLog log;
  log.meta.omega = default_omega;
  std::string text;
  std::size_t line = 0;
  bool seen_record = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line);
    }
    if (!j.is_object()) throw SchemaError("expected a JSON object", line);
    if (j.contains("meta")) {
      if (seen_record) throw SchemaError("meta header must be the first record", line, "meta");
      if (j.size() != 1) throw SchemaError("meta header must not carry other keys", line, "meta");
      parse_meta(j.at("meta"), line, log.meta);
      seen_record = true;
      continue;
    }
    seen_record = true;
    if (!j.contains("step") || !j.at("step").is_number_integer()) {
      throw SchemaError("missing integer \"step\"", line, "step");
    }
    if (!j.contains("action") || !j.at("action").is_array()) {
      throw SchemaError("missing \"action\" array", line, "action");
    }
    for (const auto& [key, value] : j.items()) {
      (void)value;
      if (key != "step" && key != "action") throw SchemaError("unknown key '" + key + "'", line, key);
    }
    const auto& action = j.at("action");
    if (action.size() != 7) {
      throw SchemaError("action must have 7 entries, got " + std::to_string(action.size()), line, "action");
    }
    std::array<double, 7> a{};
    for (std::size_t i = 0; i < 7; ++i) {
      if (!action[i].is_number()) throw SchemaError("action entries must be numbers", line, "action");
      a[i] = action[i].get<double>();
      if (!std::isfinite(a[i])) throw SchemaError("action entries must be finite", line, "action");
    }
    const std::int64_t id = j.at("step").get<std::int64_t>();
    if (!log.step_ids.empty() && id <= log.step_ids.back()) {
      throw SchemaError("step ids must be strictly increasing", line, "step");
    }
    log.step_ids.push_back(id);
    log.steps.push_back(kin::ActionIncrement::from_array(a));
  }
  if (log.steps.empty()) throw SchemaError("episode has no action steps");

  if (log.meta.angle_unit == AngleUnit::kDegrees) {
    constexpr double kDegToRad = std::numbers::pi / 180.0;
    for (auto& s : log.steps) {
      s.droll *= kDegToRad;
      s.dpitch *= kDegToRad;
      s.dyaw *= kDegToRad;
    }
  }
  if (log.dropped_steps() != 0) {
    log.warnings.push_back("dropped " + std::to_string(log.dropped_steps()) +
                           " trailing step(s) that do not fill a window of " +
                           std::to_string(log.meta.omega));
  }
  return log;
}

EpisodeLog load_episode(const std::filesystem::path& path, std::size_t default_omega) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open episode log " + path.string());
  return parse_episode(in, default_omega);
}

void write_episode(std::ostream& out, const EpisodeLog& log) {
  json meta;
  meta["omega"] = log.meta.omega;
  meta["angle_unit"] = "rad";
  if (!log.meta.embedding_files.empty()) meta["embedding_files"] = log.meta.embedding_files;
  out << json{{"meta", meta}}.dump() << '\n';
  for (std::size_t i = 0; i < log.steps.size(); ++i) {
    nlohmann::ordered_json rec;
    rec["step"] = i < log.step_ids.size() ? log.step_ids[i] : static_cast<std::int64_t>(i);
    rec["action"] = log.steps[i].to_array();
    out << rec.dump() << '\n';
  }
}

std::vector<double> window_distances(const EpisodeLog& log, const kin::KinematicsConfig& config) {
  std::vector<double> out;
  out.reserve(log.window_count());
  for (std::size_t i = 1; i <= log.window_count(); ++i) {
    out.push_back(kin::window_distance(log.window(i), config));
  }
  return out;
}

}  // namespace adp::episode
