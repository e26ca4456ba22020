// adp: replay recorded action logs through the action-aware pruning pipeline.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "adp/config.hpp"
#include "adp/embedding_io.hpp"
#include "adp/episode.hpp"
#include "adp/errors.hpp"
#include "adp/flops_model.hpp"
#include "adp/harness.hpp"
#include "adp/score_stats.hpp"
#include "adp/token_scoring.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitValidation = 2;

using Json = nlohmann::ordered_json;

// Config flags shared by the subcommands that need a HarnessConfig. Only
// flags given on the command line override values from --config.
struct ConfigFlags {
  std::string config_file;
  std::string rule, third_case, dims_preset, euler_order, composition;
  std::size_t tau = 0, cold_start = 0, max_consec = 0, omega = 0, scoring_layer = 0;
  double rho = 0.0;
  std::vector<double> alpha;
  std::uint64_t hidden = 0, intermediate = 0, layers = 0, num_heads = 0, head_dim = 0;
  std::uint64_t l_vis = 0, l_txt = 0, l_prop = 0, l_act = 0;
  bool no_eos = false;

  std::vector<std::pair<std::string, CLI::Option*>> options;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "JSON config file")->check(CLI::ExistingFile);
    auto add = [&](const std::string& key, const std::string& flag, auto& target, const std::string& help) {
      options.emplace_back(key, app->add_option(flag, target, help));
    };
    add("rule", "--rule", rule, "gating rule: mean|extrema");
    add("tau", "--tau", tau, "extrema lookback (windows)");
    add("third_case", "--third-case", third_case, "inherit|force_prune");
    add("cold_start_windows", "--cold-start-windows", cold_start, "initial full-vision windows");
    add("max_consecutive_pruned", "--max-consecutive-pruned", max_consec, "pruned-run cap");
    add("omega", "--omega", omega, "action chunk size");
    add("rho", "--rho", rho, "retention ratio in (0, 1]");
    add("alpha", "--alpha", alpha, "per-view retention weights");
    add("scoring_layer", "--scoring-layer", scoring_layer, "layer whose Q/K weights score tokens");
    add("dims_preset", "--dims-preset", dims_preset, "width preset (llama2-7b-oft, or 'none')");
    add("euler_order", "--euler-order", euler_order, "xyz|xzy|yxz|yzx|zxy|zyx");
    add("composition", "--composition", composition, "body|world");
    add("dims.hidden", "--hidden", hidden, "D");
    add("dims.intermediate", "--intermediate", intermediate, "M");
    add("dims.layers", "--layers", layers, "H");
    add("dims.num_heads", "--num-heads", num_heads, "attention heads");
    add("dims.head_dim", "--head-dim", head_dim, "head width");
    add("dims.l_vis", "--l-vis", l_vis, "visual tokens");
    add("dims.l_txt", "--l-txt", l_txt, "text tokens");
    add("dims.l_prop", "--l-prop", l_prop, "proprioception tokens");
    add("dims.l_act", "--l-act", l_act, "action placeholder tokens");
    options.emplace_back("dims.eos", app->add_flag("--no-eos", no_eos, "sequence has no trailing EOS"));
  }

  adp::HarnessConfig build() const {
    adp::HarnessConfig cfg;
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      std::stringstream ss;
      ss << in.rdbuf();
      cfg = adp::parse_config_text(ss.str(), cfg);
    }
    Json overlay = Json::object();
    Json dims = Json::object();
    for (const auto& [key, opt] : options) {
      if (opt->count() == 0) continue;
      Json value;
      if (key == "rule") value = rule;
      else if (key == "tau") value = tau;
      else if (key == "third_case") value = third_case;
      else if (key == "cold_start_windows") value = cold_start;
      else if (key == "max_consecutive_pruned") value = max_consec;
      else if (key == "omega") value = omega;
      else if (key == "rho") value = rho;
      else if (key == "alpha") value = alpha;
      else if (key == "scoring_layer") value = scoring_layer;
      else if (key == "dims_preset") value = dims_preset == "none" ? Json(nullptr) : Json(dims_preset);
      else if (key == "euler_order") value = euler_order;
      else if (key == "composition") value = composition;
      else if (key == "dims.hidden") value = hidden;
      else if (key == "dims.intermediate") value = intermediate;
      else if (key == "dims.layers") value = layers;
      else if (key == "dims.num_heads") value = num_heads;
      else if (key == "dims.head_dim") value = head_dim;
      else if (key == "dims.l_vis") value = l_vis;
      else if (key == "dims.l_txt") value = l_txt;
      else if (key == "dims.l_prop") value = l_prop;
      else if (key == "dims.l_act") value = l_act;
      else if (key == "dims.eos") value = !no_eos;
      if (key.rfind("dims.", 0) == 0) {
        dims[key.substr(5)] = value;
      } else {
        overlay[key] = value;
      }
    }
    if (!dims.empty()) overlay["dims"] = dims;
    return adp::parse_config(nlohmann::json::parse(overlay.dump()), cfg);
  }
};

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw adp::InvalidArgument("cannot write " + out_path);
  out << text;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

adp::harness::VisionInputs load_vision(const std::string& embeddings, const std::string& weights) {
  adp::harness::VisionInputs vision;
  if (!weights.empty()) vision.weights = adp::io::read_weights(weights);
  if (!embeddings.empty()) vision.shared = adp::io::read_embeddings(embeddings);
  return vision;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

// Whitespace/comma separated numbers, one layer per non-empty line.
std::vector<std::vector<double>> read_score_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw adp::InvalidArgument("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#') continue;
    for (char& c : line) {
      if (c == ',' || c == ';' || c == '\t') c = ' ';
    }
    std::istringstream ss(line);
    std::vector<double> row;
    std::string tok;
    while (ss >> tok) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') throw adp::ParseError("not a number: '" + tok + "'", n);
      row.push_back(v);
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw adp::ParseError("score file has no rows");
  return rows;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Action-aware dynamic visual-token pruning: replay, gating, scoring and cost tools"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(adp::version()));

  // simulate
  auto* sim = app.add_subcommand("simulate", "Replay an episode through gating, pruning and the cost model");
  ConfigFlags sim_cfg;
  sim_cfg.attach(sim);
  std::string sim_log, sim_dir, sim_emb, sim_weights, sim_out;
  std::size_t sim_jobs = 1;
  auto* sim_log_opt = sim->add_option("--log", sim_log, "episode JSONL")->check(CLI::ExistingFile);
  sim->add_option("--episode-dir", sim_dir, "directory of *.jsonl episodes")
      ->check(CLI::ExistingDirectory)
      ->excludes(sim_log_opt);
  sim->add_option("--jobs", sim_jobs, "worker threads for --episode-dir")->check(CLI::PositiveNumber);
  sim->add_option("--embeddings", sim_emb, "embedding file scored on every pruned window")
      ->check(CLI::ExistingFile);
  sim->add_option("--weights", sim_weights, "Q/K projection weights file")->check(CLI::ExistingFile);
  sim->add_option("--out", sim_out, "write the report here instead of stdout");

  // gate
  auto* gate_cmd = app.add_subcommand("gate", "Window distances and gate decisions only");
  ConfigFlags gate_cfg;
  gate_cfg.attach(gate_cmd);
  std::string gate_log, gate_out;
  gate_cmd->add_option("--log", gate_log, "episode JSONL")->required()->check(CLI::ExistingFile);
  gate_cmd->add_option("--out", gate_out, "output file");

  // score
  auto* score = app.add_subcommand("score", "Importance scores and per-view Top-K from embedding files");
  std::string sc_emb, sc_weights, sc_out, sc_pruned;
  double sc_rho = 0.5;
  std::vector<double> sc_alpha;
  score->add_option("--embeddings", sc_emb, "embedding file")->required()->check(CLI::ExistingFile);
  score->add_option("--weights", sc_weights, "Q/K weights file")->required()->check(CLI::ExistingFile);
  score->add_option("--rho", sc_rho, "retention ratio in (0, 1]");
  score->add_option("--alpha", sc_alpha, "per-view weights (default 1 view: 1; 2 views: 0.4 0.6)");
  score->add_option("--pruned-out", sc_pruned, "write the pruned sequence as an embedding file");
  score->add_option("--out", sc_out, "output file");

  // flops
  auto* fl = app.add_subcommand("flops", "Cost tables over a rho grid, or fit the published FLOPs column");
  ConfigFlags fl_cfg;
  fl_cfg.attach(fl);
  std::vector<double> fl_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  double fl_gamma = 1.0;
  std::int64_t fl_forwards = 1;
  bool fl_calibrate = false;
  bool fl_csv = false;
  std::string fl_out;
  fl->add_option("--rho-grid", fl_grid, "retention ratios to tabulate");
  fl->add_option("--gamma", fl_gamma, "pruned fraction for the episode expectation")->check(CLI::Range(0.0, 1.0));
  fl->add_option("--forwards", fl_forwards, "forwards per episode (T)")->check(CLI::PositiveNumber);
  fl->add_flag("--calibrate", fl_calibrate, "fit sequence lengths and gamma to the LIBERO FLOPs column");
  fl->add_flag("--csv", fl_csv, "emit the table as CSV");
  fl->add_option("--out", fl_out, "output file");

  // stats
  auto* st = app.add_subcommand("stats", "Participation ratio and entropy per layer as CSV");
  std::string st_scores, st_emb, st_weights, st_out;
  st->add_option("--scores", st_scores, "one importance vector per line (layer order)")->check(CLI::ExistingFile);
  st->add_option("--embeddings", st_emb, "score layer 0 from embeddings")->check(CLI::ExistingFile);
  st->add_option("--weights", st_weights, "Q/K weights for --embeddings")->check(CLI::ExistingFile);
  st->add_option("--out", st_out, "output file");

  // compare-random
  auto* cr = app.add_subcommand("compare-random", "Target retention of uniform random pruning vs ADP");
  ConfigFlags cr_cfg;
  cr_cfg.attach(cr);
  std::uint64_t cr_tokens = 0, cr_targets = 0, cr_trials = 100000, cr_seed = 0;
  std::vector<std::size_t> cr_k, cr_mask;
  std::string cr_log, cr_emb, cr_weights, cr_out;
  cr->add_option("--tokens,-V", cr_tokens, "visual tokens V (default: L_vis of the run)");
  cr->add_option("--targets,-m", cr_targets, "target patches m");
  cr->add_option("--kept,-k", cr_k, "explicit kept counts (instead of --log)");
  cr->add_option("--target-mask", cr_mask, "visual indices covered by the target");
  cr->add_option("--trials", cr_trials, "Monte-Carlo trials")->check(CLI::PositiveNumber);
  cr->add_option("--seed", cr_seed, "Monte-Carlo seed");
  cr->add_option("--log", cr_log, "episode JSONL to take k values from")->check(CLI::ExistingFile);
  cr->add_option("--embeddings", cr_emb, "embedding file")->check(CLI::ExistingFile);
  cr->add_option("--weights", cr_weights, "Q/K weights file")->check(CLI::ExistingFile);
  cr->add_option("--out", cr_out, "output file");

  // synth
  auto* sy = app.add_subcommand("synth", "Generate a deterministic synthetic episode log");
  std::uint64_t sy_seed = 42;
  std::string sy_profile = "mixed", sy_out;
  std::size_t sy_windows = 50, sy_omega = 8, sy_extra = 0;
  sy->add_option("--seed", sy_seed, "generator seed");
  sy->add_option("--profile", sy_profile, "coarse|fine|mixed");
  sy->add_option("--windows,-T", sy_windows, "number of windows")->check(CLI::PositiveNumber);
  sy->add_option("--omega", sy_omega, "steps per window")->check(CLI::PositiveNumber);
  sy->add_option("--extra-steps", sy_extra, "append this many steps past the last full window");
  sy->add_option("--out", sy_out, "output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*sim) {
      const auto cfg = sim_cfg.build();
      auto vision = load_vision(sim_emb, sim_weights);
      if (!sim_dir.empty()) {
        Json all = Json::array();
        for (auto& [name, report] : adp::harness::run_directory(sim_dir, cfg, vision, sim_jobs)) {
          print_warnings(report.warnings);
          Json entry;
          entry["episode"] = name;
          entry["report"] = adp::harness::to_json(report);
          all.push_back(std::move(entry));
        }
        emit(dump(all), sim_out);
        return kExitOk;
      }
      if (sim_log.empty()) throw adp::InvalidArgument("simulate needs --log or --episode-dir");
      const auto log = adp::episode::load_episode(sim_log, cfg.gate.omega);
      print_warnings(log.warnings);
      if (!log.meta.embedding_files.empty()) {
        vision.per_window =
            adp::harness::load_window_embeddings(log, std::filesystem::path(sim_log).parent_path());
      }
      const auto report = adp::harness::run_episode(log, cfg, vision);
      emit(dump(adp::harness::to_json(report)), sim_out);
      return kExitOk;
    }

    if (*gate_cmd) {
      const auto cfg = gate_cfg.build();
      const auto log = adp::episode::load_episode(gate_log, cfg.gate.omega);
      print_warnings(log.warnings);
      if (log.meta.omega != cfg.gate.omega) {
        throw adp::InvalidArgument("episode omega does not match configured omega");
      }
      const auto deltas = adp::episode::window_distances(log, cfg.kinematics);
      if (deltas.empty()) throw adp::InvalidArgument("episode has no complete window");
      const auto trace = adp::gate::gate_trace(deltas, cfg.gate);
      emit(dump(adp::harness::gate_report(deltas, trace)), gate_out);
      return kExitOk;
    }

    if (*score) {
      const auto emb = adp::io::read_embeddings(sc_emb);
      const auto weights = adp::io::read_weights(sc_weights);
      if (sc_alpha.empty()) sc_alpha = adp::tokens::default_alpha(emb.view_lengths().size());
      const auto result = adp::tokens::prune_pipeline(emb, weights, sc_rho, sc_alpha);
      if (!sc_pruned.empty()) adp::io::write_embeddings(sc_pruned, result.pruned);
      Json j;
      j["rows"] = emb.rows();
      j["l_vis"] = emb.vis_length();
      j["view_lengths"] = emb.view_lengths();
      j["rho"] = result.decision.rho;
      j["alpha"] = result.decision.alpha;
      j["k"] = result.decision.k;
      j["floor_quota"] = result.decision.floor_quota;
      j["quota"] = result.decision.quota;
      j["kept_indices"] = result.decision.kept_indices;
      j["pruned_rows"] = result.pruned.rows();
      Json phi = Json::array();
      for (double p : result.scores.phi) phi.push_back(adp::harness::round_sig6(p));
      j["importance"] = std::move(phi);
      emit(dump(j), sc_out);
      return kExitOk;
    }

    if (*fl) {
      const auto cfg = fl_cfg.build();
      if (fl_calibrate) {
        const auto report = adp::flops::calibrate(cfg.dims, adp::flops::CalibrationTarget::libero_oft());
        auto fit_json = [](const adp::flops::CalibrationFit& f) {
          Json j;
          j["interpretation"] = adp::flops::to_string(f.interpretation);
          j["l_vis"] = f.l_vis;
          j["l_other"] = f.l_other;
          j["gamma"] = adp::harness::round_sig6(f.gamma);
          j["model_base_tera"] = adp::harness::round_sig6(f.model_base_tera);
          j["base_relative_error"] = adp::harness::round_sig6(f.base_relative_error);
          Json pts = Json::array();
          const auto target = adp::flops::CalibrationTarget::libero_oft();
          for (std::size_t i = 0; i < f.model_tera.size(); ++i) {
            Json p;
            p["rho"] = target.rhos[i];
            p["target_tera"] = target.tera_flops[i];
            p["model_tera"] = adp::harness::round_sig6(f.model_tera[i]);
            p["relative_error"] = adp::harness::round_sig6(f.relative_error[i]);
            pts.push_back(std::move(p));
          }
          j["points"] = std::move(pts);
          j["max_relative_error"] = adp::harness::round_sig6(f.max_relative_error);
          return j;
        };
        Json j;
        j["per_forward"] = fit_json(report.per_forward);
        j["episode_average"] = fit_json(report.episode_average);
        j["best"] = adp::flops::to_string(report.best().interpretation);
        emit(dump(j), fl_out);
        return kExitOk;
      }
      const auto gamma = adp::flops::Fraction::from_double(fl_gamma);
      const auto base = adp::flops::baseline_flops(cfg.dims);
      const auto scoring = adp::flops::scoring_flops(cfg.dims);
      std::ostringstream csv;
      csv << "rho,k,seq_len,base,scoring,adp,delta,episode_expected,episode_savings,adp_tera\n";
      Json rows = Json::array();
      for (double rho : fl_grid) {
        const auto cost = adp::flops::episode_expected_flops(cfg.dims, rho, gamma, fl_forwards, cfg.scoring_layer);
        const auto k = adp::tokens::retained_count(rho, cfg.dims.l_vis);
        Json r;
        r["rho"] = rho;
        r["k"] = k;
        r["seq_len"] = cfg.dims.pruned_sequence_length(k);
        r["adp"] = cost.adp_per_forward;
        r["delta"] = base - cost.adp_per_forward;
        r["episode_expected"] = adp::harness::round_sig6(cost.expected());
        r["episode_savings"] = adp::harness::round_sig6(cost.savings());
        r["adp_tera"] = adp::flops::to_tera_string(static_cast<double>(cost.adp_per_forward));
        csv << rho << ',' << k << ',' << cfg.dims.pruned_sequence_length(k) << ',' << base << ',' << scoring
            << ',' << cost.adp_per_forward << ',' << (base - cost.adp_per_forward) << ','
            << adp::harness::round_sig6(cost.expected()) << ',' << adp::harness::round_sig6(cost.savings())
            << ',' << adp::flops::to_tera_string(static_cast<double>(cost.adp_per_forward)) << '\n';
        rows.push_back(std::move(r));
      }
      if (fl_csv) {
        emit(csv.str(), fl_out);
      } else {
        Json j;
        j["sequence_length"] = cfg.dims.sequence_length();
        j["base"] = base;
        j["base_tera"] = adp::flops::to_tera_string(static_cast<double>(base));
        j["scoring"] = scoring;
        j["gamma"] = fl_gamma;
        j["forwards"] = fl_forwards;
        j["rows"] = std::move(rows);
        emit(dump(j), fl_out);
      }
      return kExitOk;
    }

    if (*st) {
      std::vector<std::vector<double>> layers;
      if (!st_scores.empty()) {
        layers = read_score_rows(st_scores);
      } else if (!st_emb.empty() && !st_weights.empty()) {
        const auto emb = adp::io::read_embeddings(st_emb);
        const auto weights = adp::io::read_weights(st_weights);
        layers.push_back(
            adp::tokens::aggregate_importance(adp::tokens::attention_scores(emb, weights)).phi);
      } else {
        throw adp::InvalidArgument("stats needs --scores, or --embeddings with --weights");
      }
      std::ostringstream csv;
      csv << "layer,tokens,participation_ratio,entropy_nats,entropy_bits\n";
      char buf[160];
      for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto dist = adp::stats::normalize(layers[l]);
        const double pr = adp::stats::participation_ratio(dist);
        const double h = adp::stats::entropy(dist);
        std::snprintf(buf, sizeof(buf), "%zu,%zu,%.6g,%.6g,%.6g\n", l, layers[l].size(), pr, h,
                      adp::stats::nats_to_bits(h));
        csv << buf;
      }
      emit(csv.str(), st_out);
      return kExitOk;
    }

    if (*cr) {
      adp::harness::RunReport report;
      if (!cr_log.empty()) {
        const auto cfg = cr_cfg.build();
        const auto log = adp::episode::load_episode(cr_log, cfg.gate.omega);
        print_warnings(log.warnings);
        report = adp::harness::run_episode(log, cfg, load_vision(cr_emb, cr_weights));
      } else if (!cr_k.empty()) {
        for (std::size_t i = 0; i < cr_k.size(); ++i) {
          adp::harness::WindowRecord w;
          w.index = i + 1;
          w.decision = adp::gate::VisionState::kPruned;
          w.kept = cr_k[i];
          report.windows.push_back(w);
        }
      } else {
        throw adp::InvalidArgument("compare-random needs --log or --kept");
      }
      if (cr_tokens == 0) cr_tokens = report.dims.l_vis;
      if (cr_targets == 0 && !cr_mask.empty()) cr_targets = cr_mask.size();
      if (cr_tokens == 0) throw adp::InvalidArgument("compare-random needs --tokens");
      const auto cmp = adp::harness::compare_random(report, cr_tokens, cr_targets, cr_trials, cr_seed, cr_mask);
      emit(dump(adp::harness::to_json(cmp)), cr_out);
      return kExitOk;
    }

    if (*sy) {
      auto log = adp::episode::synth_episode(sy_seed, adp::episode::parse_profile(sy_profile), sy_windows, sy_omega);
      if (sy_extra > 0) {
        const auto tail = adp::episode::synth_episode(sy_seed + 1, adp::episode::parse_profile(sy_profile), 1, sy_extra);
        for (std::size_t i = 0; i < tail.steps.size(); ++i) {
          log.step_ids.push_back(static_cast<std::int64_t>(log.steps.size()));
          log.steps.push_back(tail.steps[i]);
        }
      }
      std::ostringstream out;
      adp::episode::write_episode(out, log);
      emit(out.str(), sy_out);
      return kExitOk;
    }
  } catch (const adp::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::logic_error& e) {  // InvalidArgument, InvalidState, DegenerateInput
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const adp::RangeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}
