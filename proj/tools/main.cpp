// Experiment runner: replays detection streams through the drop-aware
// trackers under periodic / event-triggered schedules and reports
// tracking quality, modeled power draw and yield.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dropsim/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TargetSpec {
  int n = 1;
  int m = 1;
};

TargetSpec parse_target(const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos)
    throw CLI::ValidationError("target", "expected n/m, got '" + text + "'");
  TargetSpec t;
  try {
    t.n = std::stoi(text.substr(0, slash));
    t.m = std::stoi(text.substr(slash + 1));
  } catch (const std::exception&) {
    throw CLI::ValidationError("target", "expected n/m, got '" + text + "'");
  }
  if (t.n < 1 || t.m < t.n) throw CLI::ValidationError("target", "need 1 <= n <= m");
  return t;
}

dropsim::RunConfig load_config(const std::string& path) {
  dropsim::RunConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  in >> j;
  return j.get<dropsim::RunConfig>();
}

void write_text_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
}

void print_banner(const dropsim::RunConfig& cfg) {
  std::cout << "effective config:\n" << json(cfg).dump(2) << "\n";
}

void write_run_artifacts(const fs::path& dir, const dropsim::RunResult& result) {
  fs::create_directories(dir / "tracks");
  for (const auto& run : result.runs) {
    std::ofstream out(dir / "tracks" / (run.sequence_id + ".txt"));
    dropsim::kitti::write_tracking_output(run.outputs, out);
  }
  std::ostringstream schedule;
  schedule << "sequence,frames_total,frames_processed,frames_event_triggered,eff_target\n";
  for (const auto& run : result.runs) {
    schedule << run.sequence_id << ',' << run.stats.frames_total << ','
             << run.stats.frames_processed << ',' << run.stats.frames_event_triggered << ','
             << dropsim::kitti::format_double(run.stats.effective_target()) << '\n';
  }
  write_text_file(dir / "schedule.csv", schedule.str());
}

void write_reports(const fs::path& dir, const std::vector<dropsim::SweepRow>& rows) {
  std::ostringstream csv, txt;
  dropsim::write_report_csv(rows, csv);
  dropsim::write_report_text(rows, txt);
  write_text_file(dir / "report.csv", csv.str());
  write_text_file(dir / "report.txt", txt.str());
  write_text_file(dir / "report.json", json(rows).dump(2) + "\n");
  std::cout << txt.str();
}

dropsim::RunResult execute(const dropsim::RunConfig& cfg,
                           const std::vector<dropsim::kitti::SequenceData>& sequences,
                           const dropsim::EnergyProfile& profile, int n, int m, bool trigger) {
  dropsim::SchedulerConfig scheduler = cfg.scheduler;
  scheduler.n = n;
  scheduler.m = m;
  scheduler.event_trigger_enabled = trigger;
  return dropsim::run_experiment(sequences, scheduler, cfg.tracker, cfg.matching, profile,
                                 cfg.camera_always_on, cfg.cycle_time, cfg.jobs);
}

int cmd_run(const dropsim::RunConfig& cfg) {
  cfg.validate();
  print_banner(cfg);
  const auto sequences = dropsim::load_input(cfg);
  const auto profile = dropsim::resolve_profile(cfg.energy_profile);

  auto result = execute(cfg, sequences, profile, cfg.scheduler.n, cfg.scheduler.m,
                        cfg.scheduler.event_trigger_enabled);

  // Yield is relative to the 100% baseline of the same configuration.
  if (cfg.scheduler.n != cfg.scheduler.m) {
    const auto baseline = execute(cfg, sequences, profile, 1, 1, false);
    result.yield_w_per_hota = dropsim::compute_yield(
        {baseline.sys_draw_w, baseline.hota.hota, result.sys_draw_w, result.hota.hota});
  }

  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_text_file(dir / "effective_config.json", json(cfg).dump(2) + "\n");
  write_run_artifacts(dir, result);
  write_reports(dir, {dropsim::SweepRow::from(result, cfg.scheduler.n, cfg.scheduler.m,
                                              cfg.scheduler.event_trigger_enabled)});
  if (result.hota.vacuous)
    std::cout << "note: no ground truth and no predictions; HOTA is vacuous\n";
  return 0;
}

int cmd_sweep(const dropsim::RunConfig& cfg, const std::vector<std::string>& target_args,
              const std::string& trigger_mode) {
  cfg.validate();
  print_banner(cfg);
  std::vector<TargetSpec> targets;
  for (const auto& t : target_args) targets.push_back(parse_target(t));
  if (targets.empty())
    for (int m : {1, 2, 3, 5, 10}) targets.push_back(TargetSpec{1, m});

  const auto sequences = dropsim::load_input(cfg);
  const auto profile = dropsim::resolve_profile(cfg.energy_profile);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_text_file(dir / "effective_config.json", json(cfg).dump(2) + "\n");

  std::vector<dropsim::SweepRow> rows;
  std::optional<dropsim::RunResult> full_rate;
  auto run_one = [&](const TargetSpec& t, bool trigger) {
    auto result = execute(cfg, sequences, profile, t.n, t.m, trigger);
    if (t.n == t.m && !full_rate) full_rate = result;
    if (t.n != t.m && full_rate) {
      result.yield_w_per_hota = dropsim::compute_yield(
          {full_rate->sys_draw_w, full_rate->hota.hota, result.sys_draw_w, result.hota.hota});
    }
    const std::string label =
        std::to_string(t.n) + "-" + std::to_string(t.m) + (trigger ? "-trigger" : "-baseline");
    write_run_artifacts(dir / "runs" / label, result);
    rows.push_back(dropsim::SweepRow::from(result, t.n, t.m, trigger));
  };

  // The 100% rows first so every later row has its yield baseline; a
  // full-rate schedule leaves no frame for the trigger to add.
  std::stable_sort(targets.begin(), targets.end(), [](const TargetSpec& a, const TargetSpec& b) {
    return (a.n == a.m) > (b.n == b.m);
  });
  for (const auto& t : targets) {
    if (t.n == t.m) {
      run_one(t, false);
      continue;
    }
    if (trigger_mode == "off" || trigger_mode == "both") run_one(t, false);
    if (trigger_mode == "on" || trigger_mode == "both") run_one(t, true);
  }
  write_reports(dir, rows);
  return 0;
}

int cmd_calibrate(const std::string& observations_path, const std::string& output_path,
                  const std::string& method_id, const std::string& model_id) {
  std::ifstream in(observations_path);
  if (!in) throw std::runtime_error("cannot open observations " + observations_path);
  std::vector<std::pair<double, double>> observations;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    for (auto& c : line)
      if (c == ',' || c == ';') c = ' ';
    std::istringstream row(line);
    double target = 0.0, watts = 0.0;
    if (!(row >> target >> watts)) {
      if (line_no == 1) continue;  // header
      if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      throw std::runtime_error("observations line " + std::to_string(line_no) + ": expected 'target watts'");
    }
    observations.emplace_back(target, watts);
  }

  const auto fit =
      dropsim::fit_profile(observations, dropsim::parse_fit_method(method_id), model_id);
  dropsim::save_profile(fit.profile, output_path);

  std::ostringstream residuals;
  residuals << "target,observed_w,predicted_w,residual_w\n";
  for (size_t i = 0; i < observations.size(); ++i) {
    const auto& [target, watts] = observations[i];
    residuals << dropsim::kitti::format_double(target) << ',' << dropsim::kitti::format_double(watts)
              << ',' << dropsim::kitti::format_double(dropsim::predicted_draw(fit.profile, target, false))
              << ',' << dropsim::kitti::format_double(fit.residuals[i]) << '\n';
  }
  const fs::path residual_path = fs::path(output_path).replace_extension(".residuals.csv");
  write_text_file(residual_path, residuals.str());

  std::cout << "fitted profile -> " << output_path << " (residuals -> "
            << residual_path.string() << ")\n"
            << "  idle_power:         " << fit.profile.idle_power << " W\n"
            << "  lidar_active_power: " << fit.profile.lidar_active_power << " W\n"
            << "  max |residual|:     " << fit.max_abs_residual << " W\n";
  return 0;
}

int cmd_gen(const std::string& spec_path, const std::string& output_dir) {
  const dropsim::ScenarioSpec spec = spec_path.front() == '@'
                                         ? dropsim::builtin_scenario(spec_path.substr(1))
                                         : dropsim::load_scenario_spec(spec_path);
  const dropsim::ScenarioData data = dropsim::generate(spec);
  dropsim::write_dataset(data, output_dir);
  dropsim::save_scenario_spec(spec, fs::path(output_dir) / "scenario.json");
  std::cout << "wrote " << data.num_frames << " frames (" << data.gt_rows.size() << " gt rows, "
            << data.lidar_rows.size() << " lidar rows, " << data.camera_rows.size()
            << " camera rows) to " << output_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"frame-dropping perception simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string dataset_dir, scenario, target_flag, profile_flag, output_flag, variant_flag;
  std::vector<std::string> sequence_flags;
  int jobs_flag = 0;
  std::string trigger_flag;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "run configuration (JSON)");
    cmd->add_option("--dataset", dataset_dir, "dataset directory (see README for the layout)");
    cmd->add_option("--scenario", scenario, "scenario spec JSON, or @late-detection / @urban-crossings");
    cmd->add_option("--seq", sequence_flags, "sequence ids to include (default: all)");
    cmd->add_option("--profile", profile_flag, "energy profile: pointpillars | pv-rcnn | second | file.json");
    cmd->add_option("--output", output_flag, "output directory");
    cmd->add_option("--variant", variant_flag, "tracker variant: lidar-only | fusion");
    cmd->add_option("--jobs", jobs_flag, "parallel sequence workers");
  };

  CLI::App* run = app.add_subcommand("run", "run one configuration and report metrics");
  add_common(run);
  run->add_option("--target", target_flag, "baseline processing target n/m (e.g. 1/2)");
  run->add_option("--trigger", trigger_flag, "event trigger: on | off");

  CLI::App* sweep = app.add_subcommand("sweep", "sweep processing targets");
  add_common(sweep);
  std::vector<std::string> sweep_targets;
  std::string sweep_trigger = "both";
  sweep->add_option("--targets", sweep_targets, "targets as n/m (default: 1/1 1/2 1/3 1/5 1/10)");
  sweep->add_option("--trigger", sweep_trigger, "event trigger rows: on | off | both")
      ->check(CLI::IsMember({"on", "off", "both"}));

  CLI::App* calibrate = app.add_subcommand("calibrate", "fit an energy profile from observations");
  std::string observations_path, calibrate_output = "profile.json";
  std::string fit_method = "least-squares", fit_model = "pv-rcnn";
  calibrate->add_option("--observations", observations_path, "CSV of 'target,watts' rows")
      ->required();
  calibrate->add_option("--output", calibrate_output, "profile JSON to write");
  calibrate->add_option("--method", fit_method, "least-squares | minimax");
  calibrate->add_option("--model", fit_model, "model id recorded in the profile");

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset from a scenario spec");
  std::string gen_spec, gen_output = "dataset";
  gen->add_option("--spec", gen_spec, "scenario spec JSON or builtin (@name)")->required();
  gen->add_option("--output", gen_output, "dataset directory to create");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(calibrate))
      return cmd_calibrate(observations_path, calibrate_output, fit_method, fit_model);
    if (app.got_subcommand(gen)) return cmd_gen(gen_spec, gen_output);

    dropsim::RunConfig cfg = load_config(config_path);
    if (!dataset_dir.empty()) {
      cfg.dataset_dir = dataset_dir;
      cfg.scenario.clear();
    }
    if (!scenario.empty()) {
      cfg.scenario = scenario;
      cfg.dataset_dir.clear();
    }
    if (!sequence_flags.empty()) cfg.sequences = sequence_flags;
    if (!profile_flag.empty()) cfg.energy_profile = profile_flag;
    if (!output_flag.empty()) cfg.output_dir = output_flag;
    if (!variant_flag.empty()) cfg.tracker.variant = dropsim::parse_tracker_variant(variant_flag);
    if (jobs_flag > 0) cfg.jobs = jobs_flag;

    if (app.got_subcommand(run)) {
      if (!target_flag.empty()) {
        const TargetSpec t = parse_target(target_flag);
        cfg.scheduler.n = t.n;
        cfg.scheduler.m = t.m;
      }
      if (!trigger_flag.empty()) cfg.scheduler.event_trigger_enabled = trigger_flag == "on";
      return cmd_run(cfg);
    }
    return cmd_sweep(cfg, sweep_targets, sweep_trigger);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
