#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "caneflow/errors.hpp"
#include "caneflow/harness.hpp"
#include "caneflow/kernels.hpp"

namespace {

using namespace caneflow;

void apply_kernel_choice(const std::string& choice) {
  if (choice == "auto")
    kern::select_best_backend();
  else if (choice == "scalar")
    kern::select_backend(kern::Backend::scalar);
  else if (choice == "avx2")
    kern::select_backend(kern::Backend::avx2);
  else
    throw Error(ErrorCategory::config, "unknown kernel backend: " + choice);
}

int run(int argc, char** argv) {
  CLI::App app{"Elevator mass-flow pipeline: simulate, estimate, calibrate, report"};
  app.require_subcommand(1);

  std::string kernel = "auto";
  app.add_option("--kernel", kernel, "Compute backend: auto, scalar, avx2")
      ->capture_default_str();

  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic campaign");
  std::string preset;
  std::string config_path;
  std::string sim_out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_runs;
  std::optional<double> duration;
  sim_cmd->add_option("--preset", preset, "Campaign preset: lab, lab-full, field");
  sim_cmd->add_option("--config", config_path, "Campaign config JSON");
  sim_cmd->add_option("--out", sim_out, "Output directory")->required();
  sim_cmd->add_option("--seed", seed, "Campaign seed override");
  sim_cmd->add_option("--runs", n_runs, "Keep only the first N runs");
  sim_cmd->add_option("--duration", duration, "Force run duration in seconds");

  auto* est_cmd = app.add_subcommand("estimate", "Per-frame ROI volume estimates");
  std::string est_out;
  std::optional<double> cell_size;
  std::optional<double> lux_gate;
  std::optional<double> percentile;
  est_cmd->add_option("--out", est_out, "Campaign directory")->required();
  est_cmd->add_option("--cell-size", cell_size, "Raster cell size in meters");
  est_cmd->add_option("--lux-gate", lux_gate, "Low-light threshold in lux");
  est_cmd->add_option("--percentile", percentile, "Per-cell height percentile");

  auto* cal_cmd = app.add_subcommand("calibrate", "Density calibration and analytics");
  std::string cal_out;
  std::string transform = "sqrt";
  std::string low_light = "include";
  std::string group_by = "year,region,crop_type";
  cal_cmd->add_option("--out", cal_out, "Campaign directory")->required();
  cal_cmd->add_option("--transform", transform, "Volume transform: identity, sqrt")
      ->capture_default_str();
  cal_cmd->add_option("--low-light", low_light, "Low-light frames: include, exclude")
      ->capture_default_str();
  cal_cmd->add_option("--group-by", group_by, "CV grouping keys, comma separated")
      ->capture_default_str();

  auto* rep_cmd = app.add_subcommand("report", "Summarize a calibrated campaign");
  std::string rep_out;
  rep_cmd->add_option("--out", rep_out, "Campaign directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  apply_kernel_choice(kernel);

  if (sim_cmd->parsed()) {
    if (preset.empty() == config_path.empty())
      throw Error(ErrorCategory::config,
                  "simulate needs exactly one of --preset or --config");
    harness::CampaignConfig config =
        preset.empty() ? harness::load_config(config_path)
                       : harness::make_preset(preset, seed.value_or(1234));
    if (seed) config.seed = *seed;
    if (n_runs && config.runs.size() > *n_runs) config.runs.resize(*n_runs);
    if (duration) {
      if (*duration <= 0.0)
        throw Error(ErrorCategory::config, "duration must be positive");
      for (harness::LabRunSpec& r : config.runs) r.scenario.duration = *duration;
    }
    harness::cmd_simulate(config, sim_out);
  } else if (est_cmd->parsed()) {
    harness::EstimateOverrides ov;
    ov.cell_size = cell_size;
    ov.lux_gate = lux_gate;
    ov.percentile = percentile;
    harness::cmd_estimate(est_out, ov);
  } else if (cal_cmd->parsed()) {
    harness::CalibrateOptions opts;
    opts.transform = flow::parse_transform(transform);
    opts.policy = flow::parse_policy(low_light);
    opts.group_by = ana::parse_group_by(group_by);
    harness::cmd_calibrate(cal_out, opts);
  } else if (rep_cmd->parsed()) {
    harness::cmd_report(rep_out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::fprintf(stderr, "error:%s: %s\n", category_name(e.category()), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error:internal: %s\n", e.what());
    return 1;
  }
}
