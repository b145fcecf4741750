#include "caneflow/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include <json.hpp>

#include "caneflow/errors.hpp"
#include "caneflow/io.hpp"
#include "caneflow/rng.hpp"

namespace caneflow::harness {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json parse_json_or_throw(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCategory::config, origin + ": " + e.what());
  }
}

// One synthesized field load before calibration.
struct FieldLoad {
  std::string load_id;
  int year = 0;
  std::string region;
  std::string crop_type;
  double accum_identity = 0.0;
  double accum_sqrt = 0.0;
  double actual_mass_kg = 0.0;
  double duration_s = 0.0;
};

std::vector<FieldLoad> synth_field_loads(const CampaignConfig& c) {
  std::vector<FieldLoad> loads;
  for (std::size_t gi = 0; gi < c.groups.size(); ++gi) {
    const FieldGroupSpec& g = c.groups[gi];
    Rng rng(derive_seed(c.seed, 500 + gi));
    for (std::size_t j = 0; j < g.n_loads; ++j) {
      const double volume = g.mean_volume *
                            std::exp(rng.normal(0.0, 1.0) * g.volume_sigma -
                                     0.5 * g.volume_sigma * g.volume_sigma);
      const double travel = g.travel_mean *
                            std::exp(rng.normal(0.0, 1.0) * g.travel_sigma -
                                     0.5 * g.travel_sigma * g.travel_sigma);
      const double noise = std::max(1.0 + rng.normal(0.0, g.density_noise), 0.5);
      const double shift =
          g.shift.enabled && j >= g.shift.after_load ? g.shift.factor : 1.0;
      const double rho =
          g.rho0 * std::pow(g.mean_volume / volume, g.volume_exponent) * shift * noise;
      FieldLoad l;
      char id[64];
      std::snprintf(id, sizeof(id), "%d_%s_%s_%03zu", g.year, g.region.c_str(),
                    g.crop_type.c_str(), j);
      l.load_id = id;
      l.year = g.year;
      l.region = g.region;
      l.crop_type = g.crop_type;
      l.accum_identity = volume;
      l.accum_sqrt = std::sqrt(volume * travel);
      l.actual_mass_kg = rho * volume;
      l.duration_s = travel / 2.0;
      loads.push_back(std::move(l));
    }
  }
  return loads;
}

void write_field_truth_csv(const fs::path& path, const std::vector<FieldLoad>& loads) {
  std::ostringstream out;
  out << "load_id,year,region,crop_type,accum_identity,accum_sqrt,actual_mass_kg,"
         "duration_s\n";
  for (const FieldLoad& l : loads)
    out << l.load_id << ',' << l.year << ',' << l.region << ',' << l.crop_type << ','
        << io::fmt(l.accum_identity) << ',' << io::fmt(l.accum_sqrt) << ','
        << io::fmt(l.actual_mass_kg) << ',' << io::fmt(l.duration_s) << '\n';
  io::write_file(path, out.str());
}

std::vector<FieldLoad> read_field_truth_csv(const fs::path& path) {
  std::vector<FieldLoad> loads;
  std::istringstream in(io::read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line.rfind("load_id,", 0) != 0)
        throw Error(ErrorCategory::io, path.string() + ": missing field truth header");
      continue;
    }
    std::vector<std::string> f;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        f.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    f.push_back(cur);
    if (f.size() != 8) {
      std::ostringstream msg;
      msg << path.string() << ":" << line_no << ": expected 8 columns";
      throw Error(ErrorCategory::io, msg.str());
    }
    FieldLoad l;
    l.load_id = f[0];
    l.year = std::stoi(f[1]);
    l.region = f[2];
    l.crop_type = f[3];
    l.accum_identity = std::stod(f[4]);
    l.accum_sqrt = std::stod(f[5]);
    l.actual_mass_kg = std::stod(f[6]);
    l.duration_s = std::stod(f[7]);
    loads.push_back(std::move(l));
  }
  return loads;
}

std::string group_slug(int year, const std::string& crop, const std::string& region) {
  std::ostringstream ss;
  ss << year << '_' << crop << '_' << region;
  return ss.str();
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string serialize_config(const CampaignConfig& c) {
  std::ostringstream out;
  const sim::SimParams& s = c.sim;
  const est::EstimatorParams& e = c.est;
  out << "{\n"
      << "  \"kind\": \"" << c.kind << "\",\n"
      << "  \"seed\": " << c.seed << ",\n"
      << "  \"sim\": {\n"
      << "    \"billet_diameter\": " << io::fmt(s.billet_diameter) << ",\n"
      << "    \"billet_length\": " << io::fmt(s.billet_length) << ",\n"
      << "    \"particle_density\": " << io::fmt(s.particle_density) << ",\n"
      << "    \"roi\": {\"width\": " << io::fmt(s.roi.width)
      << ", \"length\": " << io::fmt(s.roi.length)
      << ", \"plane_height\": " << io::fmt(s.roi.plane_height) << "},\n"
      << "    \"point_spacing\": " << io::fmt(s.point_spacing) << ",\n"
      << "    \"noise_sigma\": " << io::fmt(s.noise_sigma) << ",\n"
      << "    \"lowlight_lux\": " << io::fmt(s.lowlight_lux) << ",\n"
      << "    \"lowlight_inflation\": " << io::fmt(s.lowlight_inflation) << ",\n"
      << "    \"lowlight_max_bias\": " << io::fmt(s.lowlight_max_bias) << ",\n"
      << "    \"deposit_cell\": " << io::fmt(s.deposit_cell) << ",\n"
      << "    \"prop_lift_max\": " << io::fmt(s.prop_lift_max) << ",\n"
      << "    \"prop_lift_slope\": " << io::fmt(s.prop_lift_slope) << ",\n"
      << "    \"slat_cap_height\": " << io::fmt(s.slat_cap_height) << ",\n"
      << "    \"packing_ref\": " << io::fmt(s.packing_ref) << ",\n"
      << "    \"spill_min_fraction\": " << io::fmt(s.spill_min_fraction) << ",\n"
      << "    \"spill_back_min\": " << io::fmt(s.spill_back_min) << ",\n"
      << "    \"spill_back_max\": " << io::fmt(s.spill_back_max) << ",\n"
      << "    \"sprocket\": {\"pulses_per_rev\": " << s.sprocket.pulses_per_rev
      << ", \"circumference\": " << io::fmt(s.sprocket.circumference) << "},\n"
      << "    \"pulse_jitter\": " << io::fmt(s.pulse_jitter) << "\n"
      << "  },\n"
      << "  \"est\": {\n"
      << "    \"cell_size\": " << io::fmt(e.cell_size) << ",\n"
      << "    \"percentile\": " << io::fmt(e.percentile) << ",\n"
      << "    \"lux_gate\": " << io::fmt(e.lux_gate) << ",\n"
      << "    \"min_height\": " << io::fmt(e.min_height) << ",\n"
      << "    \"empty_epsilon\": " << io::fmt(e.empty_epsilon) << "\n"
      << "  },\n";
  out << "  \"runs\": [";
  for (std::size_t i = 0; i < c.runs.size(); ++i) {
    const LabRunSpec& r = c.runs[i];
    out << (i == 0 ? "\n" : ",\n");
    out << "    {\"id\": \"" << r.run_id << "\", \"mass_flow_target\": "
        << io::fmt(r.scenario.mass_flow_target)
        << ", \"elevator_speed\": " << io::fmt(r.scenario.elevator_speed)
        << ", \"duration\": " << io::fmt(r.scenario.duration)
        << ", \"lux\": " << io::fmt(r.scenario.lighting.lux)
        << ", \"frame_rate\": " << io::fmt(r.scenario.frame_rate)
        << ", \"rng_seed\": " << r.scenario.rng_seed << ", \"overflow_enabled\": "
        << (r.scenario.overflow_enabled ? "true" : "false") << "}";
  }
  out << (c.runs.empty() ? "],\n" : "\n  ],\n");
  out << "  \"groups\": [";
  for (std::size_t i = 0; i < c.groups.size(); ++i) {
    const FieldGroupSpec& g = c.groups[i];
    out << (i == 0 ? "\n" : ",\n");
    out << "    {\"year\": " << g.year << ", \"region\": \"" << g.region
        << "\", \"crop_type\": \"" << g.crop_type << "\", \"n_loads\": " << g.n_loads
        << ", \"rho0\": " << io::fmt(g.rho0)
        << ", \"volume_exponent\": " << io::fmt(g.volume_exponent)
        << ", \"mean_volume\": " << io::fmt(g.mean_volume)
        << ", \"volume_sigma\": " << io::fmt(g.volume_sigma)
        << ", \"travel_mean\": " << io::fmt(g.travel_mean)
        << ", \"travel_sigma\": " << io::fmt(g.travel_sigma)
        << ", \"density_noise\": " << io::fmt(g.density_noise)
        << ", \"shift\": {\"enabled\": " << (g.shift.enabled ? "true" : "false")
        << ", \"after_load\": " << g.shift.after_load
        << ", \"factor\": " << io::fmt(g.shift.factor) << "}}";
  }
  out << (c.groups.empty() ? "]\n" : "\n  ]\n");
  out << "}\n";
  return out.str();
}

CampaignConfig parse_config(const std::string& text, const std::string& origin) {
  const json j = parse_json_or_throw(text, origin);
  try {
    CampaignConfig c;
    c.kind = j.at("kind").get<std::string>();
    if (c.kind != "lab" && c.kind != "field")
      throw Error(ErrorCategory::config, origin + ": kind must be lab or field");
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("sim")) {
      const json& s = j["sim"];
      sim::SimParams& p = c.sim;
      p.billet_diameter = s.value("billet_diameter", p.billet_diameter);
      p.billet_length = s.value("billet_length", p.billet_length);
      p.particle_density = s.value("particle_density", p.particle_density);
      if (s.contains("roi")) {
        p.roi.width = s["roi"].value("width", p.roi.width);
        p.roi.length = s["roi"].value("length", p.roi.length);
        p.roi.plane_height = s["roi"].value("plane_height", p.roi.plane_height);
      }
      p.point_spacing = s.value("point_spacing", p.point_spacing);
      p.noise_sigma = s.value("noise_sigma", p.noise_sigma);
      p.lowlight_lux = s.value("lowlight_lux", p.lowlight_lux);
      p.lowlight_inflation = s.value("lowlight_inflation", p.lowlight_inflation);
      p.lowlight_max_bias = s.value("lowlight_max_bias", p.lowlight_max_bias);
      p.deposit_cell = s.value("deposit_cell", p.deposit_cell);
      p.prop_lift_max = s.value("prop_lift_max", p.prop_lift_max);
      p.prop_lift_slope = s.value("prop_lift_slope", p.prop_lift_slope);
      p.slat_cap_height = s.value("slat_cap_height", p.slat_cap_height);
      p.packing_ref = s.value("packing_ref", p.packing_ref);
      p.spill_min_fraction = s.value("spill_min_fraction", p.spill_min_fraction);
      p.spill_back_min = s.value("spill_back_min", p.spill_back_min);
      p.spill_back_max = s.value("spill_back_max", p.spill_back_max);
      if (s.contains("sprocket")) {
        p.sprocket.pulses_per_rev =
            s["sprocket"].value("pulses_per_rev", p.sprocket.pulses_per_rev);
        p.sprocket.circumference =
            s["sprocket"].value("circumference", p.sprocket.circumference);
      }
      p.pulse_jitter = s.value("pulse_jitter", p.pulse_jitter);
    }
    c.est.roi = RoiSpec{0.0, 0.0, c.sim.roi.width, c.sim.roi.length, 0.0};
    if (j.contains("est")) {
      const json& s = j["est"];
      est::EstimatorParams& p = c.est;
      p.cell_size = s.value("cell_size", p.cell_size);
      p.percentile = s.value("percentile", p.percentile);
      p.lux_gate = s.value("lux_gate", p.lux_gate);
      p.min_height = s.value("min_height", p.min_height);
      p.empty_epsilon = s.value("empty_epsilon", p.empty_epsilon);
    }
    for (const json& r : j.value("runs", json::array())) {
      LabRunSpec spec;
      spec.run_id = r.at("id").get<std::string>();
      spec.scenario.mass_flow_target = r.at("mass_flow_target").get<double>();
      spec.scenario.elevator_speed = r.at("elevator_speed").get<double>();
      spec.scenario.duration = r.at("duration").get<double>();
      spec.scenario.lighting.lux = r.at("lux").get<double>();
      spec.scenario.frame_rate = r.at("frame_rate").get<double>();
      spec.scenario.rng_seed = r.at("rng_seed").get<std::uint64_t>();
      spec.scenario.overflow_enabled = r.value("overflow_enabled", false);
      c.runs.push_back(std::move(spec));
    }
    for (const json& gj : j.value("groups", json::array())) {
      FieldGroupSpec g;
      g.year = gj.at("year").get<int>();
      g.region = gj.at("region").get<std::string>();
      g.crop_type = gj.at("crop_type").get<std::string>();
      g.n_loads = gj.at("n_loads").get<std::size_t>();
      g.rho0 = gj.value("rho0", g.rho0);
      g.volume_exponent = gj.value("volume_exponent", g.volume_exponent);
      g.mean_volume = gj.value("mean_volume", g.mean_volume);
      g.volume_sigma = gj.value("volume_sigma", g.volume_sigma);
      g.travel_mean = gj.value("travel_mean", g.travel_mean);
      g.travel_sigma = gj.value("travel_sigma", g.travel_sigma);
      g.density_noise = gj.value("density_noise", g.density_noise);
      if (gj.contains("shift")) {
        g.shift.enabled = gj["shift"].value("enabled", false);
        g.shift.after_load = gj["shift"].value("after_load", std::size_t{0});
        g.shift.factor = gj["shift"].value("factor", 1.0);
      }
      c.groups.push_back(std::move(g));
    }
    sim::validate(c.sim);
    est::validate(c.est);
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::config, origin + ": " + e.what());
  }
}

CampaignConfig load_config(const fs::path& path) {
  return parse_config(io::read_file(path), path.string());
}

void write_manifest(const fs::path& out_dir, const Manifest& m) {
  std::ostringstream out;
  out << "{\n"
      << "  \"version\": \"" << m.version << "\",\n"
      << "  \"kind\": \"" << m.kind << "\",\n"
      << "  \"seed\": " << m.seed << ",\n"
      << "  \"config_hash\": \"" << hex64(m.config_hash) << "\",\n"
      << "  \"artifacts\": {";
  bool first = true;
  for (const auto& [name, path] : m.artifacts) {
    out << (first ? "\n" : ",\n") << "    \"" << name << "\": \"" << path << "\"";
    first = false;
  }
  out << (m.artifacts.empty() ? "},\n" : "\n  },\n");
  out << "  \"runs\": [";
  for (std::size_t i = 0; i < m.runs.size(); ++i) {
    out << (i == 0 ? "\n" : ",\n") << "    {\"id\": \"" << m.runs[i].id
        << "\", \"files\": {";
    bool f2 = true;
    for (const auto& [name, path] : m.runs[i].files) {
      out << (f2 ? "" : ", ") << "\"" << name << "\": \"" << path << "\"";
      f2 = false;
    }
    out << "}}";
  }
  out << (m.runs.empty() ? "]\n" : "\n  ]\n");
  out << "}\n";
  io::write_file(out_dir / "manifest.json", out.str());
}

Manifest read_manifest(const fs::path& out_dir) {
  const fs::path path = out_dir / "manifest.json";
  const json j = parse_json_or_throw(io::read_file(path), path.string());
  try {
    Manifest m;
    m.version = j.at("version").get<std::string>();
    m.kind = j.at("kind").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
    for (const auto& [name, p] : j.at("artifacts").items())
      m.artifacts[name] = p.get<std::string>();
    for (const json& r : j.at("runs")) {
      RunEntry e;
      e.id = r.at("id").get<std::string>();
      for (const auto& [name, p] : r.at("files").items())
        e.files[name] = p.get<std::string>();
      m.runs.push_back(std::move(e));
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::manifest, path.string() + ": " + e.what());
  }
}

CampaignConfig verify_manifest(const fs::path& out_dir, const Manifest& m) {
  const auto it = m.artifacts.find("config");
  if (it == m.artifacts.end())
    throw Error(ErrorCategory::manifest, "manifest lists no config artifact");
  const std::string text = io::read_file(out_dir / it->second);
  const std::uint64_t h = fnv1a64(text);
  if (h != m.config_hash)
    throw Error(ErrorCategory::manifest,
                "config hash mismatch: manifest " + hex64(m.config_hash) +
                    " vs file " + hex64(h) + "; refusing to run on tampered inputs");
  CampaignConfig c = parse_config(text, (out_dir / it->second).string());
  if (c.kind != m.kind)
    throw Error(ErrorCategory::manifest, "manifest kind disagrees with config");
  return c;
}

void cmd_simulate(const CampaignConfig& config, const fs::path& out_dir) {
  if (config.kind == "lab" && config.runs.empty())
    throw Error(ErrorCategory::config, "lab campaign has no runs");
  if (config.kind == "field" && config.groups.empty())
    throw Error(ErrorCategory::config, "field campaign has no groups");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCategory::io, "cannot create " + out_dir.string());

  const std::string text = serialize_config(config);
  io::write_file(out_dir / "config.json", text);

  Manifest m;
  m.kind = config.kind;
  m.seed = config.seed;
  m.config_hash = fnv1a64(text);
  m.artifacts["config"] = "config.json";

  if (config.kind == "lab") {
    for (const LabRunSpec& spec : config.runs) {
      const sim::RunArtifacts art = sim::run_scenario(spec.scenario, config.sim);
      const fs::path dir = out_dir / "runs" / spec.run_id;
      fs::create_directories(dir, ec);
      if (ec) throw Error(ErrorCategory::io, "cannot create " + dir.string());
      io::write_frames_jsonl(dir / "frames.jsonl", art.frames);
      io::write_pulses_jsonl(dir / "pulses.jsonl", art.pulses);
      io::write_truth_json(dir / "truth.json", art.truth);
      RunEntry e;
      e.id = spec.run_id;
      const std::string rel = "runs/" + spec.run_id + "/";
      e.files["frames"] = rel + "frames.jsonl";
      e.files["pulses"] = rel + "pulses.jsonl";
      e.files["truth"] = rel + "truth.json";
      m.runs.push_back(std::move(e));
    }
  } else {
    const std::vector<FieldLoad> loads = synth_field_loads(config);
    write_field_truth_csv(out_dir / "field_truth.csv", loads);
    m.artifacts["field_truth"] = "field_truth.csv";
  }
  write_manifest(out_dir, m);
}

void cmd_estimate(const fs::path& out_dir, const EstimateOverrides& ov) {
  Manifest m = read_manifest(out_dir);
  const CampaignConfig config = verify_manifest(out_dir, m);
  if (config.kind != "lab")
    throw Error(ErrorCategory::config,
                "estimate needs a lab campaign with frames; field campaigns go "
                "straight to calibrate");
  est::EstimatorParams params = config.est;
  if (ov.cell_size) params.cell_size = *ov.cell_size;
  if (ov.lux_gate) params.lux_gate = *ov.lux_gate;
  if (ov.percentile) params.percentile = *ov.percentile;
  est::validate(params);

  std::size_t n_frames = 0;
  std::size_t n_low_light = 0;
  for (RunEntry& e : m.runs) {
    const auto frames = io::read_frames_jsonl(out_dir / e.files.at("frames"));
    std::vector<est::VolumeEstimate> estimates;
    estimates.reserve(frames.size());
    for (const PointCloudFrame& f : frames) {
      est::VolumeEstimate v = est::estimate_frame(f, params);
      if (v.quality == est::FrameQuality::low_light) ++n_low_light;
      ++n_frames;
      estimates.push_back(v);
    }
    const std::string rel = "runs/" + e.id + "/estimates.jsonl";
    io::write_estimates_jsonl(out_dir / rel, estimates);
    e.files["estimates"] = rel;
  }

  std::ostringstream summary;
  const double frac =
      n_frames > 0 ? static_cast<double>(n_low_light) / static_cast<double>(n_frames)
                   : 0.0;
  summary << "{\n"
          << "  \"n_frames\": " << n_frames << ",\n"
          << "  \"n_low_light\": " << n_low_light << ",\n"
          << "  \"low_light_fraction\": " << io::fmt(frac) << ",\n"
          << "  \"cell_size\": " << io::fmt(params.cell_size) << ",\n"
          << "  \"percentile\": " << io::fmt(params.percentile) << ",\n"
          << "  \"lux_gate\": " << io::fmt(params.lux_gate) << "\n"
          << "}\n";
  io::write_file(out_dir / "estimates_summary.json", summary.str());
  m.artifacts["estimates_summary"] = "estimates_summary.json";
  write_manifest(out_dir, m);
}

namespace {

struct CalibrationSet {
  std::vector<flow::LoadRecord> identity;
  std::vector<flow::LoadRecord> sqrt;
  // Chosen-transform flow samples per run, written after density is known.
  std::map<std::string, std::vector<flow::FlowSample>> flows;
};

// Mean calibration density over clean loads: weighed, positive volume, no
// overflow, no low-light contamination. A campaign that conveyed no volume at
// all has nothing to calibrate against; its predictions are zero for any
// density, so zero is returned instead of an error.
double mean_density(const std::vector<flow::LoadRecord>& loads) {
  double sum = 0.0;
  std::size_t n = 0;
  bool any_volume = false;
  for (const flow::LoadRecord& r : loads) {
    if (r.accum_volume > 0.0) any_volume = true;
    if (!flow::calibratable(r) || r.overflow || r.n_low_light > 0) continue;
    sum += *r.actual_mass_kg / r.accum_volume;
    ++n;
  }
  if (n == 0) {
    if (!any_volume) return 0.0;
    throw Error(ErrorCategory::insufficient_data, "no calibratable loads");
  }
  return sum / static_cast<double>(n);
}

std::vector<flow::LoadRecord> clean_subset(const std::vector<flow::LoadRecord>& loads) {
  std::vector<flow::LoadRecord> out;
  for (const flow::LoadRecord& r : loads)
    if (flow::calibratable(r) && !r.overflow && r.n_low_light == 0) out.push_back(r);
  return out;
}

}  // namespace

void cmd_calibrate(const fs::path& out_dir, const CalibrateOptions& opts) {
  Manifest m = read_manifest(out_dir);
  const CampaignConfig config = verify_manifest(out_dir, m);

  CalibrationSet set;
  if (config.kind == "lab") {
    std::map<std::string, const LabRunSpec*> by_id;
    for (const LabRunSpec& r : config.runs) by_id[r.run_id] = &r;
    for (const RunEntry& e : m.runs) {
      const auto spec_it = by_id.find(e.id);
      if (spec_it == by_id.end())
        throw Error(ErrorCategory::manifest, "manifest run " + e.id + " not in config");
      const auto est_it = e.files.find("estimates");
      if (est_it == e.files.end())
        throw Error(ErrorCategory::manifest,
                    "run " + e.id + " has no estimates; run the estimate stage first");
      const auto estimates = io::read_estimates_jsonl(out_dir / est_it->second);
      const auto pulses = io::read_pulses_jsonl(out_dir / e.files.at("pulses"));
      const sim::RunTruth truth = io::read_truth_json(out_dir / e.files.at("truth"));

      flow::AccumulateOptions aopts;
      aopts.policy = opts.policy;
      aopts.rho = 1.0;
      aopts.frame_rate = spec_it->second->scenario.frame_rate;

      aopts.transform = flow::Transform::identity;
      flow::RunTotals t_id;
      auto s_id = flow::accumulate(estimates, pulses, config.sim.sprocket, aopts, t_id);
      aopts.transform = flow::Transform::sqrt;
      flow::RunTotals t_sq;
      auto s_sq = flow::accumulate(estimates, pulses, config.sim.sprocket, aopts, t_sq);

      set.identity.push_back(flow::build_load_record(
          e.id, 0, "lab", "lab", t_id, truth.duration_s, truth.total_mass_kg,
          truth.overflow));
      set.sqrt.push_back(flow::build_load_record(e.id, 0, "lab", "lab", t_sq,
                                                 truth.duration_s, truth.total_mass_kg,
                                                 truth.overflow));
      set.flows[e.id] =
          opts.transform == flow::Transform::identity ? std::move(s_id) : std::move(s_sq);
    }
  } else {
    const auto rows = read_field_truth_csv(out_dir / m.artifacts.at("field_truth"));
    for (const FieldLoad& l : rows) {
      flow::RunTotals t_id;
      t_id.accumulated_volume = l.accum_identity;
      flow::RunTotals t_sq;
      t_sq.accumulated_volume = l.accum_sqrt;
      set.identity.push_back(flow::build_load_record(l.load_id, l.year, l.region,
                                                     l.crop_type, t_id, l.duration_s,
                                                     l.actual_mass_kg, false));
      set.sqrt.push_back(flow::build_load_record(l.load_id, l.year, l.region,
                                                 l.crop_type, t_sq, l.duration_s,
                                                 l.actual_mass_kg, false));
    }
  }

  const double rho_identity = mean_density(set.identity);
  const double rho_sqrt = mean_density(set.sqrt);
  for (flow::LoadRecord& r : set.identity)
    r.predicted_mass_kg = r.accum_volume * rho_identity;
  for (flow::LoadRecord& r : set.sqrt) r.predicted_mass_kg = r.accum_volume * rho_sqrt;

  const double rho_chosen =
      opts.transform == flow::Transform::identity ? rho_identity : rho_sqrt;
  std::vector<flow::LoadRecord>& chosen =
      opts.transform == flow::Transform::identity ? set.identity : set.sqrt;

  if (config.kind == "lab") {
    for (RunEntry& e : m.runs) {
      auto& samples = set.flows.at(e.id);
      for (flow::FlowSample& s : samples) s.m_delta = s.v_delta * rho_chosen;
      const std::string rel = "runs/" + e.id + "/flow.jsonl";
      io::write_flow_samples_jsonl(out_dir / rel, samples);
      e.files["flow"] = rel;
    }
  }

  io::write_loads_csv(out_dir / "loads.csv", chosen);
  io::write_loads_csv(out_dir / "loads_identity.csv", set.identity);
  io::write_loads_csv(out_dir / "loads_sqrt.csv", set.sqrt);
  m.artifacts["loads"] = "loads.csv";
  m.artifacts["loads_identity"] = "loads_identity.csv";
  m.artifacts["loads_sqrt"] = "loads_sqrt.csv";

  const auto clean_identity = clean_subset(set.identity);
  const auto clean_sqrt = clean_subset(set.sqrt);
  const auto cv_rows =
      ana::compare_transforms(clean_identity, clean_sqrt, opts.group_by);
  io::write_cv_csv(out_dir / "cv.csv", cv_rows);
  m.artifacts["cv"] = "cv.csv";

  std::vector<ana::FitPoint> points;
  for (const flow::LoadRecord& r : chosen) {
    if (!r.actual_mass_kg || r.n_low_light > 0) continue;
    points.push_back(ana::FitPoint{r.predicted_mass_kg / r.duration_s,
                                   *r.actual_mass_kg / r.duration_s, r.overflow});
  }
  ana::FitResult fit;
  try {
    fit = ana::fit_through_origin(points, true);
  } catch (const Error&) {
    fit = ana::FitResult{};  // degenerate campaign, n = 0 marks no usable fit
  }
  io::write_fit_json(out_dir / "fit.json", fit);
  m.artifacts["fit"] = "fit.json";

  // Density-shift scan per group over the clean chosen-transform loads. Lab
  // campaigns deliberately sweep operating points, so drift monitoring only
  // makes sense for field seasons.
  if (config.kind == "field") {
    std::map<std::string, std::vector<ana::DensityEstimate>> series;
    const auto clean_chosen =
        opts.transform == flow::Transform::identity ? clean_identity : clean_sqrt;
    std::map<std::string, std::size_t> counters;
    for (const flow::LoadRecord& r : clean_chosen) {
      const std::string slug = group_slug(r.year, r.crop_type, r.region);
      const auto d = ana::estimate_density(r, static_cast<double>(counters[slug]++));
      if (d) series[slug].push_back(*d);
    }
    for (const auto& [slug, s] : series) {
      if (s.size() < 10) continue;
      const ana::ShiftReport rep = ana::detect_shift(s);
      const std::string base = "shift_" + slug;
      io::write_shift_json(out_dir / (base + ".json"), rep);
      io::write_shift_trace_csv(out_dir / (base + "_trace.csv"), s, rep);
      m.artifacts[base] = base + ".json";
      m.artifacts[base + "_trace"] = base + "_trace.csv";
    }
  }

  std::ostringstream cal;
  cal << "{\n"
      << "  \"transform\": \"" << flow::transform_name(opts.transform) << "\",\n"
      << "  \"low_light_policy\": \"" << flow::policy_name(opts.policy) << "\",\n"
      << "  \"rho_identity\": " << io::fmt(rho_identity) << ",\n"
      << "  \"rho_sqrt\": " << io::fmt(rho_sqrt) << ",\n"
      << "  \"n_loads\": " << chosen.size() << ",\n"
      << "  \"n_calibration_loads\": " << clean_identity.size() << "\n"
      << "}\n";
  io::write_file(out_dir / "calibration.json", cal.str());
  m.artifacts["calibration"] = "calibration.json";

  write_manifest(out_dir, m);
}

void cmd_report(const fs::path& out_dir) {
  const Manifest m = read_manifest(out_dir);
  (void)verify_manifest(out_dir, m);

  const auto need = [&](const char* name) -> fs::path {
    const auto it = m.artifacts.find(name);
    if (it == m.artifacts.end())
      throw Error(ErrorCategory::manifest,
                  std::string("missing artifact '") + name +
                      "'; run earlier pipeline stages first");
    return out_dir / it->second;
  };

  const auto loads = io::read_loads_csv(need("loads"));
  const json cal = parse_json_or_throw(io::read_file(need("calibration")),
                                       "calibration.json");
  const json fit = parse_json_or_throw(io::read_file(need("fit")), "fit.json");

  std::size_t n_empty = 0;
  std::size_t n_overflow = 0;
  double empty_bias_sum = 0.0;
  for (const flow::LoadRecord& r : loads) {
    if (r.overflow) ++n_overflow;
    if (r.actual_mass_kg && *r.actual_mass_kg == 0.0) {
      ++n_empty;
      empty_bias_sum += std::abs(r.predicted_mass_kg);
    }
  }

  std::ostringstream out;
  out << "caneflow pipeline report (tool " << m.version << ")\n";
  out << "campaign: " << m.kind << ", seed " << m.seed << ", config "
      << hex64(m.config_hash) << "\n";
  out << "loads: " << loads.size() << " total, "
      << cal.at("n_calibration_loads").get<std::size_t>() << " used for calibration, "
      << n_overflow << " overflow\n";
  if (m.artifacts.count("estimates_summary") > 0) {
    const json es = parse_json_or_throw(io::read_file(need("estimates_summary")),
                                        "estimates_summary.json");
    out << "frames: " << es.at("n_frames").get<std::size_t>() << " total, "
        << es.at("n_low_light").get<std::size_t>() << " low-light (fraction "
        << io::fmt(es.at("low_light_fraction").get<double>()) << ")\n";
  }
  out << "density calibration (" << cal.at("transform").get<std::string>()
      << " transform, low-light " << cal.at("low_light_policy").get<std::string>()
      << "): identity " << io::fmt(cal.at("rho_identity").get<double>())
      << ", sqrt " << io::fmt(cal.at("rho_sqrt").get<double>()) << "\n";

  out << "cv by group (identity -> sqrt):\n";
  {
    std::istringstream cvs(io::read_file(need("cv")));
    std::string line;
    std::getline(cvs, line);
    while (std::getline(cvs, line)) {
      if (line.empty()) continue;
      std::vector<std::string> f;
      std::string cur;
      for (char ch : line) {
        if (ch == ',') {
          f.push_back(cur);
          cur.clear();
        } else {
          cur.push_back(ch);
        }
      }
      f.push_back(cur);
      if (f.size() != 6) continue;
      out << "  " << f[0] << "/" << f[1] << "/" << f[2] << ": n_loads " << f[3]
          << ", cv " << f[4] << "% -> " << f[5] << "%\n";
    }
  }

  out << "through-origin fit (mean mass flow): slope "
      << io::fmt(fit.at("slope").get<double>()) << ", r_squared "
      << io::fmt(fit.at("r_squared").get<double>()) << ", n "
      << fit.at("n").get<std::size_t>() << ", overflow excluded "
      << fit.at("excluded_overflow").get<std::size_t>() << "\n";

  bool any_scan = false;
  bool any_shift = false;
  for (const auto& [name, rel] : m.artifacts) {
    if (name.rfind("shift_", 0) != 0 || name.size() < 6 ||
        name.rfind("_trace") == name.size() - 6)
      continue;
    any_scan = true;
    const json sj = parse_json_or_throw(io::read_file(out_dir / rel), rel);
    const auto& cps = sj.at("changepoints");
    out << "shift scan " << name.substr(6) << ": ";
    if (cps.empty()) {
      out << "no changepoints\n";
    } else {
      any_shift = true;
      out << "changepoints at [";
      for (std::size_t i = 0; i < cps.size(); ++i)
        out << (i ? ", " : "") << cps[i].get<std::size_t>();
      out << "], segment means [";
      const auto& means = sj.at("segment_means");
      for (std::size_t i = 0; i < means.size(); ++i)
        out << (i ? ", " : "") << io::fmt(means[i].get<double>());
      out << "]\n";
    }
  }
  if (any_scan && !any_shift) out << "no density shifts detected\n";

  if (n_empty > 0) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f",
                  empty_bias_sum / static_cast<double>(n_empty));
    out << "empty-run bias: " << buf << " kg\n";
  }

  io::write_file(out_dir / "report.txt", out.str());
}

}  // namespace caneflow::harness
