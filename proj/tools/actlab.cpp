// actlab command-line front end.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include "actlab/checkpoint.hpp"
#include "actlab/csv.hpp"
#include "actlab/error.hpp"
#include "actlab/experiment.hpp"
#include "actlab/gradsim.hpp"
#include "actlab/landscape.hpp"
#include "actlab/ppo.hpp"
#include "actlab/svg.hpp"

namespace fs = std::filesystem;
using namespace actlab;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kNumeric = 3, kIo = 4 };

struct Common {
  std::string config;
  std::string output_root;
  std::string seeds;
  int workers = 1;
  bool force = false;
};

ExperimentConfig load_with_overrides(const Common& o) {
  ExperimentConfig exp = o.config.empty() ? experiment_from_json(json::object()) : load_experiment(o.config);
  exp.output_root = o.output_root.empty() ? resolve_output_root(exp.output_root) : o.output_root;
  if (!o.seeds.empty()) exp.seeds = parse_seed_set(o.seeds);
  exp.set_workers(o.workers);
  return exp;
}

void write_snapshot(const fs::path& dir, const ExperimentConfig& exp) {
  write_text_file(dir / "config.snapshot", canonical_dump(to_json(exp)) + "\n");
}

ExperimentConfig read_snapshot(const fs::path& run_dir) {
  const auto path = run_dir / "config.snapshot";
  if (!fs::exists(path)) throw IoError(run_dir.string() + " has no config.snapshot; not a run directory");
  return load_experiment(path);
}

std::string x_column(const ExperimentConfig& exp) {
  return exp.ppo.gradient_batch_override ? "gradient_step" : "env_step";
}

// ---- train ---------------------------------------------------------------

fs::path train_run(const ExperimentConfig& exp, std::size_t mode, std::uint64_t seed, bool force) {
  const fs::path dir = exp.run_dir(mode, seed);
  if (fs::exists(dir)) {
    if (!force) throw IoError(dir.string() + " already exists; pass --force to overwrite it");
    fs::remove_all(dir);
  }
  fs::create_directories(dir / "checkpoints");
  const ExperimentConfig one = exp.single(mode, seed);
  write_snapshot(dir, one);
  TrainOptions opt;
  opt.keep_series = false;
  opt.dump_dir = dir;
  opt.sink = [&](const Checkpoint& c) { save_checkpoint(c, dir / "checkpoints" / (c.id() + ".bin")); };
  const TrainResult r = train(exp.run_config(mode), seed, opt);
  if (r.series.empty() && fs::is_empty(dir / "checkpoints"))
    save_checkpoint(r.final, dir / "checkpoints" / (r.final.id() + ".bin"));
  write_csv(dir / "curves.csv", curve_table(r.curve));
  const double last = r.curve.empty() ? 0.0 : r.curve.back().mean_return;
  std::printf("trained %s seed %llu: %lld env steps, final return %.3f -> %s\n",
              std::string(to_string(exp.modes[mode].kind)).c_str(), static_cast<unsigned long long>(seed),
              static_cast<long long>(r.final.env_step), last, dir.string().c_str());
  std::fflush(stdout);
  return dir;
}

// Merges per-seed curves of every mode and renders them together.
fs::path render_experiment_curves(const ExperimentConfig& exp) {
  const fs::path root = fs::path(exp.output_root) / exp.name;
  std::vector<CurveSet> sets;
  for (std::size_t m = 0; m < exp.modes.size(); ++m) {
    CsvTable merged;
    merged.header = curve_table({}).header;
    for (auto seed : exp.seeds) {
      const auto path = exp.run_dir(m, seed) / "curves.csv";
      if (!fs::exists(path)) continue;
      for (auto& row : read_csv(path).rows) merged.rows.push_back(std::move(row));
    }
    if (merged.rows.empty()) continue;
    const std::string label(to_string(exp.modes[m].kind));
    write_csv(root / label / "curves.csv", merged);
    sets.push_back({label, std::move(merged)});
  }
  const fs::path out = root / "learning_curves.svg";
  if (sets.empty()) return out;
  CurveOptions opt;
  opt.x_column = x_column(exp);
  opt.title = exp.name + ": evaluation return (mean +- std over seeds)";
  std::vector<std::string> warnings;
  write_text_file(out, render_learning_curves(sets, opt, &warnings));
  for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  return out;
}

std::vector<fs::path> cmd_train(const ExperimentConfig& exp, bool force) {
  std::vector<fs::path> dirs;
  for (std::size_t m = 0; m < exp.modes.size(); ++m)
    for (auto seed : exp.seeds) dirs.push_back(train_run(exp, m, seed, force));
  const auto svg = render_experiment_curves(exp);
  std::printf("learning curves: %s\n", svg.string().c_str());
  return dirs;
}

// ---- landscape -----------------------------------------------------------

fs::path find_checkpoint(const fs::path& run_dir, const std::string& which) {
  const auto all = list_checkpoints(run_dir);
  if (all.empty()) throw IoError(run_dir.string() + " has no checkpoints");
  if (which.empty() || which == "final") return all.back();
  for (const auto& p : all)
    if (p.stem().string() == which || p.filename().string() == which) return p;
  try {
    std::size_t pos = 0;
    const long idx = std::stol(which, &pos);
    if (pos == which.size() && idx >= 0 && static_cast<std::size_t>(idx) < all.size()) return all[idx];
  } catch (const std::exception&) {
  }
  std::string names;
  for (const auto& p : all) names += " " + p.stem().string();
  throw ConfigError("no checkpoint '" + which + "' in " + run_dir.string() + "; available:" + names);
}

fs::path cmd_landscape(const fs::path& run_dir, const std::string& which, const LandscapeConfig& cfg) {
  const auto path = find_checkpoint(run_dir, which);
  const Checkpoint ckpt = load_checkpoint(path);
  const LandscapeGrid grid = compute_grid(ckpt, cfg);
  const fs::path out = run_dir / "landscape" / ckpt.id();
  fs::create_directories(out);
  const CsvTable table = grid_table(grid);
  write_csv(out / "grid.csv", table);
  json meta = grid_meta(grid);
  meta["landscape_config"] = to_json(cfg);
  meta["env_step"] = ckpt.env_step;
  meta["stored_loss"] = {{"total", ckpt.stored_loss.total},
                         {"policy", ckpt.stored_loss.policy},
                         {"value", ckpt.stored_loss.value}};
  write_text_file(out / "meta.json", meta.dump(2) + "\n");
  write_text_file(out / "config.snapshot", ckpt.config_json + "\n");
  const std::pair<const char*, bool> fields[] = {
      {"reward", false}, {"total_loss", true}, {"policy_loss", true}, {"value_loss", true}};
  for (const auto& [column, negate] : fields) {
    HeatmapOptions opt;
    opt.column = column;
    opt.negate = negate;
    opt.resolution = grid.resolution;
    opt.title = ckpt.id() + " " + column;
    write_text_file(out / (std::string(column) + ".svg"), render_heatmap(table, opt));
  }
  std::size_t invalid = 0;
  for (const auto& c : grid.cells) invalid += !c.valid;
  std::printf("landscape %s: %dx%d cells (%zu invalid), center reward %.4f -> %s\n", ckpt.id().c_str(),
              grid.resolution, grid.resolution, invalid, grid.center().reward, out.string().c_str());
  return out;
}

// ---- gradsim -------------------------------------------------------------

fs::path cmd_gradsim(const fs::path& run_dir, const GradSimConfig& cfg) {
  std::vector<Checkpoint> series;
  for (const auto& p : list_checkpoints(run_dir)) series.push_back(load_checkpoint(p));
  if (series.empty()) throw IoError(run_dir.string() + " has no checkpoints");
  const auto records = analyze_run(series, cfg);
  const fs::path out = run_dir / "gradsim";
  const CsvTable table = records_table(records);
  write_csv(out / "records.csv", table);
  write_text_file(out / "config.snapshot", canonical_dump(to_json(cfg)) + "\n");
  for (auto term : cfg.terms) {
    const std::string name(to_string(term));
    write_text_file(out / (name + ".svg"), render_gradsim(table, name));
  }
  std::printf("gradsim: %zu records over %zu checkpoints -> %s\n", records.size(), series.size(),
              out.string().c_str());
  return out;
}

// ---- tune-gains ----------------------------------------------------------

void cmd_tune_gains(const ExperimentConfig& exp, std::uint64_t seed, int episodes) {
  const fs::path out = fs::path(exp.output_root) / exp.name / "gains";
  const auto proto = make_environment(exp.env);
  bool any = false;
  for (const auto& mode : exp.modes) {
    if (mode.kind != ActuationKind::Velocity && mode.kind != ActuationKind::Position) continue;
    any = true;
    const auto grid = default_gain_grid(mode.kind, exp.env.spec.dof);
    const TuneResult r = tune_gains(*proto, mode.kind, mode.bounds, grid, exp.env.spec.horizon, seed, episodes);
    const std::string name(to_string(mode.kind));
    CsvTable t;
    t.header = {"kd_vc", "kp_pc", "kd_pc", "error"};
    for (const auto& s : r.table)
      t.add_row({s.gains.kd_vc.empty() ? "" : format_double(s.gains.kd_vc[0]),
                 s.gains.kp_pc.empty() ? "" : format_double(s.gains.kp_pc[0]),
                 s.gains.kd_pc.empty() ? "" : format_double(s.gains.kd_pc[0]), format_double(s.error)});
    write_csv(out / (name + "_table.csv"), t);
    ActuationMode best = mode;
    best.gains = r.best;
    json report = {{"env", exp.env.id}, {"mode", name}, {"seed", seed}, {"episodes", episodes},
                   {"horizon", exp.env.spec.horizon}, {"best_error", r.best_error},
                   {"selected", to_json(best)["gains"]}, {"candidates", r.table.size()}};
    write_text_file(out / (name + ".json"), report.dump(2) + "\n");
    std::printf("%s: mean tracking error %.6g with %s -> %s\n", name.c_str(), r.best_error,
                to_json(best)["gains"].dump().c_str(), (out / (name + ".json")).string().c_str());
  }
  if (!any) throw ConfigError("tune-gains: the configuration lists no velocity or position mode");
}

// ---- reproduce -----------------------------------------------------------

struct Figure {
  const char* id;
  const char* description;
};

const Figure kFigures[] = {
    {"fig1", "learning curves per action representation (pendulum)"},
    {"fig2", "reward and negated-loss surfaces at the final checkpoint"},
    {"fig3", "gradient quality across training checkpoints"},
    {"fig6", "accurate-gradient training, x-axis in gradient steps"},
    {"fig7", "joint-space reacher with ideal position control"},
};

json base_experiment(const std::string& name, const std::string& env, std::vector<std::string> modes) {
  json act = json::array();
  for (auto& m : modes) act.push_back({{"mode", m}});
  return {{"name", name}, {"env", {{"id", env}}}, {"actuation", act}, {"desk_scale", true}};
}

void cmd_reproduce(const std::string& fig, const Common& o) {
  std::map<std::string, std::vector<std::string>> produced;
  auto prepare = [&](json j, const std::string& default_seeds) {
    Common c = o;
    if (c.seeds.empty()) c.seeds = default_seeds;
    ExperimentConfig exp = experiment_from_json(j);
    exp.output_root = c.output_root.empty() ? resolve_output_root(exp.output_root) : c.output_root;
    exp.seeds = parse_seed_set(c.seeds);
    exp.set_workers(c.workers);
    return exp;
  };
  std::vector<std::string> lines;
  if (fig == "fig1") {
    auto exp = prepare(base_experiment("fig1", "pendulum", {"torque", "velocity", "position"}), "0..4");
    cmd_train(exp, o.force);
    lines.push_back("figure 1 analog (learning curves): " +
                    (fs::path(exp.output_root) / exp.name / "learning_curves.svg").string());
  } else if (fig == "fig2") {
    auto exp = prepare(base_experiment("fig2", "pendulum", {"torque", "position"}), "0");
    exp.landscape.resolution = 31;
    cmd_train(exp, o.force);
    for (std::size_t m = 0; m < exp.modes.size(); ++m) {
      const auto out = cmd_landscape(exp.run_dir(m, exp.seeds.front()), "final", exp.landscape);
      lines.push_back("figure 2 analog (" + std::string(to_string(exp.modes[m].kind)) +
                      "): " + (out / "reward.svg").string() + ", " + (out / "total_loss.svg").string());
    }
  } else if (fig == "fig3") {
    json j = base_experiment("fig3", "pendulum", {"torque", "velocity", "position"});
    j["gradsim"] = {{"batch_sizes", {64}}, {"n_estimates", 50}};
    j["ppo"] = {{"checkpoint_count", 10}};
    auto exp = prepare(j, "0");
    cmd_train(exp, o.force);
    for (std::size_t m = 0; m < exp.modes.size(); ++m) {
      const auto out = cmd_gradsim(exp.run_dir(m, exp.seeds.front()), exp.gradsim);
      lines.push_back("figure 3 analog (" + std::string(to_string(exp.modes[m].kind)) +
                      "): " + (out / "records.csv").string() + ", " + (out / "total.svg").string());
    }
  } else if (fig == "fig6") {
    json j = base_experiment("fig6", "joint_reacher", {"torque", "position"});
    j["accurate_gradients"] = true;
    j["ppo"] = {{"total_env_steps", 1'000'000}};
    auto exp = prepare(j, "0..2");
    cmd_train(exp, o.force);
    lines.push_back("figure 6 analog (accurate gradients, gradient-step axis): " +
                    (fs::path(exp.output_root) / exp.name / "learning_curves.svg").string());
  } else if (fig == "fig7") {
    auto exp = prepare(base_experiment("fig7", "joint_reacher", {"torque", "velocity", "position", "ideal"}),
                       "0..4");
    cmd_train(exp, o.force);
    lines.push_back("figure 7 analog (joint-space reacher): " +
                    (fs::path(exp.output_root) / exp.name / "learning_curves.svg").string());
  } else {
    std::string ids;
    for (const auto& f : kFigures) ids += std::string("\n  ") + f.id + "  " + f.description;
    throw ConfigError("unknown figure id '" + fig + "'; valid ids:" + ids);
  }
  std::printf("\nproduced:\n");
  for (const auto& l : lines) std::printf("  %s\n", l.c_str());
}

// ---- plot ----------------------------------------------------------------

int run(int argc, char** argv) {
  CLI::App app{"Action-representation analysis workbench: PPO training, loss surfaces, gradient quality."};
  app.require_subcommand(1);
  Common o;
  auto add_common = [&](CLI::App* sub, bool seeds, bool force) {
    sub->add_option("-c,--config", o.config, "Experiment config (JSON)");
    sub->add_option("--output-root", o.output_root, "Output root (overrides ACTLAB_OUTPUT_ROOT and the config)");
    sub->add_option("--workers", o.workers, "Parallel workers; results do not depend on it")->check(CLI::PositiveNumber);
    if (seeds) sub->add_option("--seeds", o.seeds, "Seed set, e.g. 0..9 or 0,3,5");
    if (force) sub->add_flag("--force", o.force, "Overwrite existing run directories");
  };

  auto* train_cmd = app.add_subcommand("train", "Train every (mode, seed) combination of a config");
  add_common(train_cmd, true, true);

  std::string run_dir, which = "final";
  std::optional<std::uint64_t> dir_seed;
  std::optional<int> resolution;
  std::optional<std::int64_t> samples;
  auto* land_cmd = app.add_subcommand("landscape", "Loss/reward surface around a checkpoint");
  land_cmd->add_option("run_dir", run_dir, "Run directory")->required();
  land_cmd->add_option("--checkpoint", which, "Checkpoint id (ckpt_<step>), index, or 'final'");
  land_cmd->add_option("--direction-seed", dir_seed, "Direction seed");
  land_cmd->add_option("--resolution", resolution, "Grid resolution (odd)");
  land_cmd->add_option("--samples", samples, "Environment steps per cell");
  add_common(land_cmd, false, false);

  std::vector<std::int64_t> batch_sizes;
  std::optional<int> n_estimates;
  std::optional<std::int64_t> oracle_samples;
  std::string pairing;
  auto* grad_cmd = app.add_subcommand("gradsim", "Gradient quality over a run's checkpoints");
  grad_cmd->add_option("run_dir", run_dir, "Run directory")->required();
  grad_cmd->add_option("--batch-sizes", batch_sizes, "Estimate batch sizes");
  grad_cmd->add_option("--n-estimates", n_estimates, "Estimates per checkpoint");
  grad_cmd->add_option("--oracle-samples", oracle_samples, "Oracle sample count");
  grad_cmd->add_option("--pairing", pairing, "oracle or all_pairs")->check(CLI::IsMember({"oracle", "all_pairs"}));
  add_common(grad_cmd, false, false);

  std::uint64_t tune_seed = 0;
  int tune_episodes = 4;
  auto* tune_cmd = app.add_subcommand("tune-gains", "Grid-search controller gains by tracking error");
  tune_cmd->add_option("--seed", tune_seed, "Target stream seed");
  tune_cmd->add_option("--episodes", tune_episodes, "Episodes per candidate")->check(CLI::PositiveNumber);
  add_common(tune_cmd, false, false);

  std::string figure;
  auto* repro_cmd = app.add_subcommand("reproduce", "Canned desk-scale pipelines (fig1 fig2 fig3 fig6 fig7)");
  repro_cmd->add_option("figure", figure, "Figure id")->required();
  add_common(repro_cmd, true, true);

  std::string kind = "heatmap", output, title, cmap = "viridis";
  std::vector<std::string> inputs, labels, columns;
  bool negate = false;
  auto* plot_cmd = app.add_subcommand("plot", "Render a grid CSV or curve CSVs to SVG");
  plot_cmd->add_option("--kind", kind, "heatmap or curves")->check(CLI::IsMember({"heatmap", "curves"}));
  plot_cmd->add_option("-i,--input", inputs, "Input CSV (repeat for several curve sets)")->required();
  plot_cmd->add_option("-l,--label", labels, "Legend label per input");
  plot_cmd->add_option("--columns", columns, "heatmap: value column; curves: x and y columns");
  plot_cmd->add_option("-o,--output", output, "Output SVG")->required();
  plot_cmd->add_option("--title", title, "Plot title");
  plot_cmd->add_option("--color-map", cmap, "viridis or gray");
  plot_cmd->add_flag("--negate", negate, "Plot negated values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  if (*train_cmd) {
    cmd_train(load_with_overrides(o), o.force);
  } else if (*land_cmd) {
    ExperimentConfig exp = o.config.empty() ? read_snapshot(run_dir) : load_experiment(o.config);
    LandscapeConfig cfg = exp.landscape;
    cfg.workers = o.workers;
    if (dir_seed) cfg.direction_seed = *dir_seed;
    if (resolution) cfg.resolution = *resolution;
    if (samples) cfg.samples_per_cell = *samples;
    cmd_landscape(run_dir, which, cfg);
  } else if (*grad_cmd) {
    ExperimentConfig exp = o.config.empty() ? read_snapshot(run_dir) : load_experiment(o.config);
    GradSimConfig cfg = exp.gradsim;
    cfg.workers = o.workers;
    if (!batch_sizes.empty()) cfg.batch_sizes = batch_sizes;
    if (n_estimates) cfg.n_estimates = *n_estimates;
    if (oracle_samples) cfg.oracle_samples = *oracle_samples;
    if (!pairing.empty()) cfg.pairing = pairing == "oracle" ? Pairing::Oracle : Pairing::AllPairs;
    cmd_gradsim(run_dir, cfg);
  } else if (*tune_cmd) {
    cmd_tune_gains(load_with_overrides(o), tune_seed, tune_episodes);
  } else if (*repro_cmd) {
    cmd_reproduce(figure, o);
  } else if (*plot_cmd) {
    PlotSpec spec;
    spec.kind = kind == "heatmap" ? PlotKind::Heatmap : PlotKind::LineCurve;
    for (const auto& i : inputs) spec.inputs.emplace_back(i);
    spec.labels = labels;
    spec.columns = columns;
    spec.color_map = parse_color_map(cmap);
    spec.negate = negate;
    spec.title = title;
    spec.output = output;
    for (const auto& w : render_plot(spec)) std::fprintf(stderr, "warning: %s\n", w.c_str());
    std::printf("wrote %s\n", output.c_str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric abort: %s\n", e.what());
    return kNumeric;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kOther;
  }
}
