// Experiment runner: loads or generates instances, executes the named
// experiment, writes deterministic reports. Exit codes: 0 ok, 1 invariant
// failure, 2 usage/config/schema error.

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dmlab/doob.hpp"
#include "dmlab/io.hpp"
#include "dmlab/komlos.hpp"
#include "dmlab/limit.hpp"
#include "dmlab/processes.hpp"

namespace {

using dmlab::AdaptedProcess;
using dmlab::Dyadic;
using dmlab::FiniteFilteredSpace;
using dmlab::StoppingTime;

struct InvariantFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StopSpec {
  bool hitting = false;
  Dyadic constant;
  double threshold = 0.0;
};

struct Config {
  std::string instance_file;
  std::string generator;  // "ground_truth" | "squared_walk"
  std::uint64_t seed = 0;
  bool seed_set = false;
  int depth = 0;
  int gt_level = 0;        // 0: defaults to depth
  double jump_scale = 1.0;
  int level_from = 0;      // 0: experiment default
  int level_to = 0;
  std::vector<double> thresholds;
  std::vector<StopSpec> stops;
  std::string out;
};

int threads_from_env() {
  int threads = 4;
  if (const char* env = std::getenv("DM_LAB_THREADS")) {
    threads = std::atoi(env);
    if (threads < 1) threads = 1;
    if (threads > 64) threads = 64;
  }
  return threads;
}

void merge_config_file(Config& cfg, const std::string& path) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(dmlab::read_text_file(path));
  } catch (const std::exception& e) {
    throw dmlab::SchemaError(std::string("config: ") + e.what());
  }
  if (!root.is_object()) throw dmlab::SchemaError("config: expected a JSON object");
  if (root.contains("instance")) {
    const auto& inst = root["instance"];
    if (inst.contains("file")) cfg.instance_file = inst["file"].get<std::string>();
    if (inst.contains("generator")) cfg.generator = inst["generator"].get<std::string>();
    if (inst.contains("seed")) {
      cfg.seed = inst["seed"].get<std::uint64_t>();
      cfg.seed_set = true;
    }
    if (inst.contains("depth")) cfg.depth = inst["depth"].get<int>();
    if (inst.contains("level")) cfg.gt_level = inst["level"].get<int>();
    if (inst.contains("jump_scale")) cfg.jump_scale = inst["jump_scale"].get<double>();
  }
  if (root.contains("levels")) {
    const auto& lv = root["levels"];
    if (lv.contains("from")) cfg.level_from = lv["from"].get<int>();
    if (lv.contains("to")) cfg.level_to = lv["to"].get<int>();
  }
  if (root.contains("thresholds")) {
    cfg.thresholds = root["thresholds"].get<std::vector<double>>();
  }
  if (root.contains("stopping_times")) {
    for (const auto& s : root["stopping_times"]) {
      StopSpec spec;
      if (s.contains("constant")) {
        const auto t = Dyadic::parse(s["constant"].get<std::string>());
        if (!t) throw dmlab::SchemaError("config: stopping_times constant is not \"j/2^n\"");
        spec.constant = *t;
      } else if (s.contains("hitting")) {
        spec.hitting = true;
        spec.threshold = s["hitting"].get<double>();
      } else {
        throw dmlab::SchemaError("config: stopping_times entries need constant or hitting");
      }
      cfg.stops.push_back(spec);
    }
  }
  if (root.contains("out")) cfg.out = root["out"].get<std::string>();
}

struct LoadedInstance {
  FiniteFilteredSpace space;
  AdaptedProcess process;
  std::optional<dmlab::GroundTruthPair> ground_truth;
};

LoadedInstance resolve_instance(const Config& cfg) {
  if (!cfg.instance_file.empty()) {
    dmlab::Instance inst = dmlab::load_instance(cfg.instance_file);
    if (!inst.process.has_value()) {
      throw dmlab::SchemaError(cfg.instance_file + ": instance has no process");
    }
    return LoadedInstance{std::move(inst.space), std::move(*inst.process), std::nullopt};
  }
  if (cfg.generator == "squared_walk") {
    if (cfg.depth < 1) throw std::invalid_argument("squared_walk: --depth required");
    FiniteFilteredSpace space = dmlab::binary_tree_space(cfg.depth);
    AdaptedProcess s = dmlab::gen_squared_walk(space);
    return LoadedInstance{std::move(space), std::move(s), std::nullopt};
  }
  if (cfg.generator == "ground_truth") {
    if (cfg.depth < 1) throw std::invalid_argument("ground_truth: --depth required");
    if (!cfg.seed_set) throw std::invalid_argument("ground_truth: --seed required");
    const int level = cfg.gt_level > 0 ? cfg.gt_level : cfg.depth;
    FiniteFilteredSpace space = dmlab::binary_tree_space(cfg.depth);
    dmlab::GroundTruthPair pair =
        dmlab::gen_ground_truth(cfg.seed, space, level, cfg.jump_scale);
    AdaptedProcess s = pair.s;
    return LoadedInstance{std::move(space), std::move(s), std::move(pair)};
  }
  if (cfg.generator.empty()) {
    throw std::invalid_argument("no instance: pass an instance file or a generator");
  }
  throw std::invalid_argument("unknown generator \"" + cfg.generator +
                              "\" (expected ground_truth or squared_walk)");
}

std::vector<std::pair<std::string, StoppingTime>> resolve_stops(
    const Config& cfg, const FiniteFilteredSpace& space, const AdaptedProcess& s) {
  std::vector<std::pair<std::string, StoppingTime>> out;
  const int master = space.depth();
  const AdaptedProcess sm = dmlab::sample_to_level(s, master);
  if (cfg.stops.empty()) {
    out.emplace_back("t=" + Dyadic::one().str(),
                     dmlab::constant_stopping_time(space, Dyadic::one(), master));
    return out;
  }
  for (const auto& spec : cfg.stops) {
    if (spec.hitting) {
      out.emplace_back("hit>" + dmlab::format_double(spec.threshold),
                       dmlab::hitting_time(space, sm, spec.threshold));
    } else {
      out.emplace_back("t=" + spec.constant.str(),
                       dmlab::constant_stopping_time(space, spec.constant, master));
    }
  }
  return out;
}

// --- decompose ------------------------------------------------------------

int run_decompose(const Config& cfg) {
  LoadedInstance inst = resolve_instance(cfg);
  const int master = std::min(inst.space.depth(), inst.process.level);
  const int from = cfg.level_from > 0
                       ? cfg.level_from
                       : (inst.ground_truth ? inst.ground_truth->level : 1);
  const int to = cfg.level_to > 0 ? cfg.level_to : master;
  if (from < 1 || from > to || to > master) {
    throw std::invalid_argument("decompose: bad level range");
  }

  std::string csv =
      "level,identity_error,predictability_error,martingale_residual,min_increment,"
      "recovery_error\n";
  double worst_recovery = 0.0;
  bool any_recovery = false;
  for (int n = from; n <= to; ++n) {
    const dmlab::DoobPair pair = dmlab::doob_decompose_discrete(inst.space, inst.process, n);
    const AdaptedProcess sn = dmlab::sample_to_level(inst.process, n);

    double identity_error = 0.0;
    double min_increment = 0.0;
    for (std::int64_t j = 0; j < sn.point_count(); ++j) {
      for (std::size_t i = 0; i < inst.space.atom_count(); ++i) {
        identity_error = std::max(
            identity_error,
            std::abs(pair.m.at_index(j)[i] + pair.a.at_index(j)[i] - sn.at_index(j)[i]));
        if (j > 0) {
          min_increment = std::min(
              min_increment, pair.a.at_index(j)[i] - pair.a.at_index(j - 1)[i]);
        }
      }
    }

    double predictability_error = 0.0;
    for (std::int64_t j = 1; j < pair.a.point_count(); ++j) {
      const dmlab::Partition& part = inst.space.partition_at(Dyadic::of(j - 1, n));
      std::vector<double> first(static_cast<std::size_t>(part.block_count));
      std::vector<bool> seen(static_cast<std::size_t>(part.block_count), false);
      for (std::size_t i = 0; i < inst.space.atom_count(); ++i) {
        const auto b = static_cast<std::size_t>(part.block_of[i]);
        if (!seen[b]) {
          seen[b] = true;
          first[b] = pair.a.at_index(j)[i];
        } else {
          predictability_error =
              std::max(predictability_error, std::abs(first[b] - pair.a.at_index(j)[i]));
        }
      }
    }

    double martingale_residual = 0.0;
    for (std::int64_t j = 1; j < pair.m.point_count(); ++j) {
      const dmlab::RandomVariable drift = dmlab::conditional_expectation(
          inst.space, pair.m.at_index(j), Dyadic::of(j - 1, n));
      for (std::size_t i = 0; i < inst.space.atom_count(); ++i) {
        martingale_residual =
            std::max(martingale_residual, std::abs(drift[i] - pair.m.at_index(j - 1)[i]));
      }
    }

    std::string recovery_cell;
    if (inst.ground_truth && n >= inst.ground_truth->level) {
      const AdaptedProcess gm = dmlab::sample_to_level(inst.ground_truth->m, n);
      const AdaptedProcess ga = dmlab::sample_to_level(inst.ground_truth->a, n);
      double recovery = 0.0;
      for (std::int64_t j = 0; j < pair.m.point_count(); ++j) {
        for (std::size_t i = 0; i < inst.space.atom_count(); ++i) {
          recovery = std::max(recovery,
                              std::abs(pair.m.at_index(j)[i] - gm.at_index(j)[i]));
          recovery = std::max(recovery,
                              std::abs(pair.a.at_index(j)[i] - ga.at_index(j)[i]));
        }
      }
      recovery_cell = dmlab::format_double(recovery);
      worst_recovery = std::max(worst_recovery, recovery);
      any_recovery = true;
    }

    csv += std::to_string(n) + ',' + dmlab::format_double(identity_error) + ',' +
           dmlab::format_double(predictability_error) + ',' +
           dmlab::format_double(martingale_residual) + ',' +
           dmlab::format_double(min_increment) + ',' + recovery_cell + '\n';

    if (identity_error > 1e-12) {
      throw InvariantFailure("decompose: identity M + A = S violated at level " +
                             std::to_string(n));
    }
    if (predictability_error > 0.0) {
      throw InvariantFailure("decompose: compensator not predictable at level " +
                             std::to_string(n));
    }
    if (martingale_residual > 1e-12) {
      throw InvariantFailure("decompose: martingale property violated at level " +
                             std::to_string(n));
    }
  }

  const std::string out = cfg.out.empty() ? "decompose_report.csv" : cfg.out;
  dmlab::write_text_file(out, csv);
  if (any_recovery) {
    std::cout << "decompose: max recovery error " << dmlab::format_double(worst_recovery)
              << "\n";
    if (worst_recovery > 1e-10) {
      throw InvariantFailure("decompose: ground-truth recovery error exceeds 1e-10");
    }
  }
  std::cout << "decompose: levels " << from << ".." << to << " ok, report " << out << "\n";
  return 0;
}

// --- ui ---------------------------------------------------------------

int run_ui(const Config& cfg) {
  LoadedInstance inst = resolve_instance(cfg);
  const int master = std::min(inst.space.depth(), inst.process.level);
  const int from = cfg.level_from > 0 ? cfg.level_from : 1;
  const int to = cfg.level_to > 0 ? cfg.level_to : master;
  const std::vector<double> thresholds =
      cfg.thresholds.empty() ? std::vector<double>{0.25, 0.5, 1.0, 2.0, 4.0, 8.0}
                             : cfg.thresholds;

  const dmlab::UIDiagnostics diag =
      dmlab::ui_diagnostics(inst.space, inst.process, from, to, thresholds);

  const std::string out = cfg.out.empty() ? "ui_report.csv" : cfg.out;
  dmlab::write_text_file(out, dmlab::ui_diagnostics_to_csv(diag));

  // Tail masses must fall as the threshold grows, per level.
  for (std::size_t r = 1; r < diag.rows.size(); ++r) {
    const auto& prev = diag.rows[r - 1];
    const auto& row = diag.rows[r];
    if (row.level == prev.level && row.tail_mass > prev.tail_mass + 1e-12) {
      throw InvariantFailure("ui: tail mass not nonincreasing in c at level " +
                             std::to_string(row.level));
    }
  }
  if (diag.min_eq1_slack < -1e-10) {
    throw InvariantFailure("ui: tail bound violated (slack " +
                           dmlab::format_double(diag.min_eq1_slack) + ")");
  }
  if (diag.min_markov_slack < -1e-10) {
    throw InvariantFailure("ui: Markov bound violated (slack " +
                           dmlab::format_double(diag.min_markov_slack) + ")");
  }
  std::cout << "ui: levels " << from << ".." << to << ", " << diag.rows.size()
            << " rows, min slack " << dmlab::format_double(diag.min_eq1_slack)
            << ", report " << out << "\n";
  return 0;
}

// --- komlos ------------------------------------------------------------

int run_komlos(const Config& cfg) {
  LoadedInstance inst = resolve_instance(cfg);
  const int master = std::min(inst.space.depth(), inst.process.level);
  const int from = cfg.level_from > 0 ? cfg.level_from : 1;
  const int to = cfg.level_to > 0 ? cfg.level_to : master;
  if (from < 1 || from > to || to > master) {
    throw std::invalid_argument("komlos: bad level range");
  }

  std::vector<dmlab::RandomVariable> sequence;
  sequence.reserve(static_cast<std::size_t>(to - from + 1));
  for (int n = from; n <= to; ++n) {
    sequence.push_back(
        dmlab::doob_decompose_discrete(inst.space, inst.process, n).m.horizon());
  }
  const dmlab::KomlosExtraction extraction = dmlab::komlos_extract(inst.space, sequence);
  const dmlab::ExtractionCheck check =
      dmlab::verify_extraction(inst.space, sequence, extraction);

  const std::string out = cfg.out.empty() ? "komlos_report.json" : cfg.out;
  dmlab::write_text_file(out, dmlab::komlos_report_to_json(extraction));
  if (!check.ok) {
    throw InvariantFailure("komlos: " + check.first_failure);
  }
  std::cout << "komlos: levels " << from << ".." << to << ", sup tail inf "
            << dmlab::format_double(extraction.report.sup_tail_inf) << ", report " << out
            << "\n";
  return 0;
}

// --- convergence ---------------------------------------------------------

int run_convergence(const Config& cfg) {
  LoadedInstance inst = resolve_instance(cfg);
  const int master = inst.space.depth();
  if (inst.process.level != master) {
    throw std::invalid_argument(
        "convergence: the process must be defined on the master grid (level " +
        std::to_string(master) + ") so the reference decomposition exists");
  }
  const int from = cfg.level_from > 0 ? cfg.level_from : 1;
  const int to = cfg.level_to > 0 ? cfg.level_to : std::max(1, master - 2);
  if (from < 1 || from > to || to > master) {
    throw std::invalid_argument("convergence: bad level range");
  }
  const auto targets = resolve_stops(cfg, inst.space, inst.process);
  const int threads = threads_from_env();

  const dmlab::ConvergenceCurve curve = dmlab::convergence_curve(
      inst.space, inst.process, from, to, targets, threads);

  // The mean identity E[mixed_A_tau] = sum_j w_j E[S_{sigma_j}] - E[M_0] is
  // exact; rebuild the combination once to check it and the predictability
  // surrogate.
  const AdaptedProcess sm = dmlab::sample_to_level(inst.process, master);
  std::vector<dmlab::RandomVariable> m1s;
  for (int n = from; n <= to; ++n) {
    m1s.push_back(dmlab::doob_decompose_discrete(inst.space, sm, n).m.horizon());
  }
  dmlab::KomlosExtraction extraction = dmlab::komlos_extract(inst.space, m1s);
  std::vector<dmlab::ConvexWeights> weights = extraction.weights;
  for (auto& w : weights) w.start += from;
  const dmlab::CombinedProcesses combined =
      dmlab::build_combined(inst.space, sm, from, to, weights, threads);

  double worst_identity = 0.0;
  for (const auto& [label, tau] : targets) {
    const auto rows = dmlab::compensator_mean_at_tau(inst.space, combined, tau);
    for (const auto& row : rows) {
      worst_identity = std::max(worst_identity, row.identity_gap);
      if (row.identity_gap > 1e-12) {
        throw InvariantFailure("convergence: optional-stopping identity violated at level " +
                               std::to_string(row.n) + " for " + label);
      }
    }
  }
  std::vector<StoppingTime> taus;
  for (const auto& [label, tau] : targets) taus.push_back(tau);
  const dmlab::PredictabilityReport pred =
      dmlab::predictability_check(inst.space, combined, taus);

  const std::string out = cfg.out.empty() ? "convergence_report.csv" : cfg.out;
  dmlab::write_text_file(out, dmlab::convergence_curve_to_csv(curve));
  std::cout << "convergence: levels " << from << ".." << to << ", identity gap "
            << dmlab::format_double(worst_identity) << ", predictability upper "
            << (pred.upper_ok ? "ok" : "violated") << ", equality "
            << (pred.equality_ok ? "ok" : "violated") << ", taus "
            << (pred.taus_ok ? "ok" : "violated") << ", report " << out << "\n";
  return 0;
}

// --- validate ---------------------------------------------------------

int run_validate(const Config& cfg) {
  if (cfg.instance_file.empty()) {
    throw std::invalid_argument("validate: pass an instance file");
  }
  const dmlab::Instance inst = dmlab::load_instance(cfg.instance_file);
  std::cout << "OK: " << inst.space.atom_count() << " atoms, depth "
            << inst.space.depth();
  if (inst.process.has_value()) {
    std::cout << ", process at level " << inst.process->level;
    const dmlab::SubmartingaleCheck sub = dmlab::is_submartingale(inst.space, *inst.process);
    std::cout << (sub.ok ? ", submartingale" : ", not a submartingale (violation " +
                                                   dmlab::format_double(sub.max_violation) +
                                                   ")");
  }
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact laboratory for discrete compensator decompositions on finite "
               "filtered spaces"};
  app.require_subcommand(1);

  Config cfg;
  std::string config_path;

  const auto add_common = [&](CLI::App* cmd, bool with_instance) {
    cmd->add_option("--config", config_path, "JSON config file; flags win over it");
    cmd->add_option("--out", cfg.out, "report output path");
    if (with_instance) {
      cmd->add_option("--instance", cfg.instance_file, "instance JSON file");
      cmd->add_option("--generator", cfg.generator,
                      "instance generator: ground_truth or squared_walk");
      cmd->add_option("--seed", cfg.seed, "generator seed")
          ->each([&](const std::string&) { cfg.seed_set = true; });
      cmd->add_option("--depth", cfg.depth, "master grid depth for generators");
      cmd->add_option("--level", cfg.gt_level,
                      "predictability level for ground_truth (default: depth)");
      cmd->add_option("--jump-scale", cfg.jump_scale,
                      "compensator jump scale for ground_truth");
      cmd->add_option("--from", cfg.level_from, "first decomposition level");
      cmd->add_option("--to", cfg.level_to, "last decomposition level");
    }
  };

  auto* decompose = app.add_subcommand("decompose", "discrete decomposition + recovery");
  add_common(decompose, true);
  auto* ui = app.add_subcommand("ui", "uniform-integrability diagnostics");
  add_common(ui, true);
  ui->add_option("--thresholds", cfg.thresholds, "threshold grid (positive)");
  auto* komlos = app.add_subcommand("komlos", "forward convex combination extraction");
  add_common(komlos, true);
  auto* convergence = app.add_subcommand("convergence", "refinement pipeline curve");
  add_common(convergence, true);
  auto* validate = app.add_subcommand("validate", "validate an instance file");
  validate->add_option("--config", config_path, "JSON config file; flags win over it");
  validate->add_option("instance", cfg.instance_file, "instance JSON file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (!config_path.empty()) {
      // Flags win: reparse flags over the file-loaded config.
      Config file_cfg;
      merge_config_file(file_cfg, config_path);
      const Config flag_cfg = cfg;
      cfg = file_cfg;
      if (!flag_cfg.instance_file.empty()) cfg.instance_file = flag_cfg.instance_file;
      if (!flag_cfg.generator.empty()) cfg.generator = flag_cfg.generator;
      if (flag_cfg.seed_set) {
        cfg.seed = flag_cfg.seed;
        cfg.seed_set = true;
      }
      if (flag_cfg.depth > 0) cfg.depth = flag_cfg.depth;
      if (flag_cfg.gt_level > 0) cfg.gt_level = flag_cfg.gt_level;
      if (flag_cfg.jump_scale != 1.0) cfg.jump_scale = flag_cfg.jump_scale;
      if (flag_cfg.level_from > 0) cfg.level_from = flag_cfg.level_from;
      if (flag_cfg.level_to > 0) cfg.level_to = flag_cfg.level_to;
      if (!flag_cfg.thresholds.empty()) cfg.thresholds = flag_cfg.thresholds;
      if (!flag_cfg.stops.empty()) cfg.stops = flag_cfg.stops;
      if (!flag_cfg.out.empty()) cfg.out = flag_cfg.out;
    }

    if (decompose->parsed()) return run_decompose(cfg);
    if (ui->parsed()) return run_ui(cfg);
    if (komlos->parsed()) return run_komlos(cfg);
    if (convergence->parsed()) return run_convergence(cfg);
    if (validate->parsed()) return run_validate(cfg);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const dmlab::SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InvariantFailure& e) {
    std::cerr << "invariant failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "invariant failure: " << e.what() << "\n";
    return 1;
  }
}
