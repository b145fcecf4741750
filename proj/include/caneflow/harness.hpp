// Campaign orchestration: DOE presets, config (de)serialization and hashing,
// the run manifest, and the four pipeline stages behind the CLI subcommands.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "caneflow/ana.hpp"
#include "caneflow/est.hpp"
#include "caneflow/flow.hpp"
#include "caneflow/sim.hpp"

namespace caneflow::harness {

inline constexpr const char* kToolVersion = "0.1.0";

struct LabRunSpec {
  std::string run_id;
  sim::SimScenario scenario;
};

struct ShiftSpec {
  bool enabled = false;
  std::size_t after_load = 0;  // loads at index >= this take the factor
  double factor = 1.0;
};

// One synthetic field season cell: load-level density model with bulk density
// falling as volume rate grows (exponent 0.5 matches the sqrt correction).
struct FieldGroupSpec {
  int year = 0;
  std::string region;
  std::string crop_type;  // green | burnt
  std::size_t n_loads = 0;
  double rho0 = 320.0;            // kg/m^3 at the reference volume
  double volume_exponent = 0.5;   // density multiplier (ref_volume / volume)^exponent
  double mean_volume = 18.0;      // m^3 accumulated (identity) per load
  double volume_sigma = 0.35;     // lognormal sigma of load volumes
  double travel_mean = 3000.0;    // m of elevator travel per load
  double travel_sigma = 0.05;     // lognormal sigma of travel
  double density_noise = 0.05;    // multiplicative gaussian noise on density
  ShiftSpec shift;
};

struct CampaignConfig {
  std::string kind = "lab";  // lab | field
  std::uint64_t seed = 1234;
  sim::SimParams sim;
  est::EstimatorParams est;
  std::vector<LabRunSpec> runs;         // lab
  std::vector<FieldGroupSpec> groups;   // field
};

// Presets: "lab" is the desk-scale 239-run DOE (2.5 Hz), "lab-full" the same
// DOE at the full 7.5 Hz frame rate, "field" the six-group season campaign.
CampaignConfig make_preset(const std::string& name, std::uint64_t seed);

std::string serialize_config(const CampaignConfig& c);
CampaignConfig parse_config(const std::string& text, const std::string& origin);
CampaignConfig load_config(const std::filesystem::path& path);

std::uint64_t fnv1a64(const std::string& bytes);

struct RunEntry {
  std::string id;
  std::map<std::string, std::string> files;  // artifact name -> relative path
};

struct Manifest {
  std::string version = kToolVersion;
  std::string kind;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::vector<RunEntry> runs;
  std::map<std::string, std::string> artifacts;  // campaign-level outputs
};

void write_manifest(const std::filesystem::path& out_dir, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& out_dir);
// Recomputes the stored config's hash and compares; throws a manifest error
// on mismatch. Returns the parsed config.
CampaignConfig verify_manifest(const std::filesystem::path& out_dir, const Manifest& m);

struct EstimateOverrides {
  std::optional<double> cell_size;
  std::optional<double> lux_gate;
  std::optional<double> percentile;
};

struct CalibrateOptions {
  flow::Transform transform = flow::Transform::sqrt;
  flow::LowLightPolicy policy = flow::LowLightPolicy::include;
  ana::GroupBy group_by{};
};

void cmd_simulate(const CampaignConfig& config, const std::filesystem::path& out_dir);
void cmd_estimate(const std::filesystem::path& out_dir, const EstimateOverrides& ov);
void cmd_calibrate(const std::filesystem::path& out_dir, const CalibrateOptions& opts);
void cmd_report(const std::filesystem::path& out_dir);

}  // namespace caneflow::harness
