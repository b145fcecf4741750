#include "caneflow/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "caneflow/errors.hpp"

namespace caneflow::io {
namespace {

using nlohmann::json;

json parse_json(const std::string& text, const std::filesystem::path& path,
                std::size_t line_no) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    std::ostringstream msg;
    msg << path.string() << ":" << line_no << ": malformed JSON";
    throw Error(ErrorCategory::io, msg.str());
  }
  return j;
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      fn(line, line_no);
    } catch (const json::exception& e) {
      std::ostringstream msg;
      msg << path.string() << ":" << line_no << ": " << e.what();
      throw Error(ErrorCategory::io, msg.str());
    }
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s, const std::filesystem::path& path,
                 std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    std::ostringstream msg;
    msg << path.string() << ":" << line_no << ": bad number '" << s << "'";
    throw Error(ErrorCategory::io, msg.str());
  }
}

long long to_int(const std::string& s, const std::filesystem::path& path,
                 std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    std::ostringstream msg;
    msg << path.string() << ":" << line_no << ": bad integer '" << s << "'";
    throw Error(ErrorCategory::io, msg.str());
  }
}

est::FrameQuality parse_quality(const std::string& s, const std::filesystem::path& path,
                                std::size_t line_no) {
  if (s == "ok") return est::FrameQuality::ok;
  if (s == "low_light") return est::FrameQuality::low_light;
  if (s == "empty") return est::FrameQuality::empty;
  std::ostringstream msg;
  msg << path.string() << ":" << line_no << ": unknown quality '" << s << "'";
  throw Error(ErrorCategory::io, msg.str());
}

}  // namespace

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCategory::io, "failed writing " + path.string());
}

void write_frames_jsonl(const std::filesystem::path& path,
                        std::span<const PointCloudFrame> frames) {
  std::ostringstream out;
  for (const PointCloudFrame& f : frames) {
    out << "{\"timestamp_s\":" << fmt(f.timestamp) << ",\"lux\":" << fmt(f.lux)
        << ",\"points\":[";
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i > 0) out << ',';
      out << fmt(f.xs[i]) << ',' << fmt(f.ys[i]) << ',' << fmt(f.zs[i]);
    }
    out << "]}\n";
  }
  write_file(path, out.str());
}

std::vector<PointCloudFrame> read_frames_jsonl(const std::filesystem::path& path) {
  std::vector<PointCloudFrame> frames;
  for_each_line(path, [&](const std::string& line, std::size_t line_no) {
    const json j = parse_json(line, path, line_no);
    PointCloudFrame f;
    f.timestamp = j.at("timestamp_s").get<double>();
    f.lux = j.at("lux").get<double>();
    const auto& pts = j.at("points");
    if (pts.size() % 3 != 0) {
      std::ostringstream msg;
      msg << path.string() << ":" << line_no << ": points array not a multiple of 3";
      throw Error(ErrorCategory::io, msg.str());
    }
    f.reserve(pts.size() / 3);
    for (std::size_t i = 0; i + 2 < pts.size(); i += 3)
      f.push(pts[i].get<double>(), pts[i + 1].get<double>(), pts[i + 2].get<double>());
    frames.push_back(std::move(f));
  });
  return frames;
}

void write_pulses_jsonl(const std::filesystem::path& path,
                        std::span<const SpeedPulse> pulses) {
  std::ostringstream out;
  for (const SpeedPulse& p : pulses)
    out << "{\"timestamp_s\":" << fmt(p.timestamp) << ",\"count\":" << p.count
        << "}\n";
  write_file(path, out.str());
}

std::vector<SpeedPulse> read_pulses_jsonl(const std::filesystem::path& path) {
  std::vector<SpeedPulse> pulses;
  for_each_line(path, [&](const std::string& line, std::size_t line_no) {
    const json j = parse_json(line, path, line_no);
    SpeedPulse p;
    p.timestamp = j.at("timestamp_s").get<double>();
    p.count = j.at("count").get<std::int64_t>();
    pulses.push_back(p);
  });
  return pulses;
}

void write_truth_json(const std::filesystem::path& path, const sim::RunTruth& t) {
  std::ostringstream out;
  out << "{\n"
      << "  \"total_mass_kg\": " << fmt(t.total_mass_kg) << ",\n"
      << "  \"total_solid_volume_m3\": " << fmt(t.total_solid_volume_m3) << ",\n"
      << "  \"spilled_volume_m3\": " << fmt(t.spilled_volume_m3) << ",\n"
      << "  \"overflow\": " << (t.overflow ? "true" : "false") << ",\n"
      << "  \"duration_s\": " << fmt(t.duration_s) << ",\n"
      << "  \"n_frames\": " << t.n_frames << ",\n"
      << "  \"elevator_speed_mps\": " << fmt(t.elevator_speed_mps) << ",\n"
      << "  \"mass_flow_target_kgps\": " << fmt(t.mass_flow_target_kgps) << ",\n"
      << "  \"lux\": " << fmt(t.lux) << ",\n"
      << "  \"frame_rate_hz\": " << fmt(t.frame_rate_hz) << ",\n"
      << "  \"seed\": " << t.seed << ",\n"
      << "  \"particle_density\": " << fmt(t.particle_density) << "\n"
      << "}\n";
  write_file(path, out.str());
}

sim::RunTruth read_truth_json(const std::filesystem::path& path) {
  const json j = parse_json(read_file(path), path, 1);
  sim::RunTruth t;
  try {
    t.total_mass_kg = j.at("total_mass_kg").get<double>();
    t.total_solid_volume_m3 = j.at("total_solid_volume_m3").get<double>();
    t.spilled_volume_m3 = j.at("spilled_volume_m3").get<double>();
    t.overflow = j.at("overflow").get<bool>();
    t.duration_s = j.at("duration_s").get<double>();
    t.n_frames = j.at("n_frames").get<int>();
    t.elevator_speed_mps = j.at("elevator_speed_mps").get<double>();
    t.mass_flow_target_kgps = j.at("mass_flow_target_kgps").get<double>();
    t.lux = j.at("lux").get<double>();
    t.frame_rate_hz = j.at("frame_rate_hz").get<double>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.particle_density = j.at("particle_density").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::io, path.string() + ": " + e.what());
  }
  return t;
}

void write_estimates_jsonl(const std::filesystem::path& path,
                           std::span<const est::VolumeEstimate> estimates) {
  std::ostringstream out;
  for (const est::VolumeEstimate& e : estimates)
    out << "{\"timestamp_s\":" << fmt(e.frame_timestamp)
        << ",\"v_c_m3_per_m\":" << fmt(e.v_c) << ",\"quality\":\""
        << est::quality_name(e.quality) << "\"}\n";
  write_file(path, out.str());
}

std::vector<est::VolumeEstimate> read_estimates_jsonl(const std::filesystem::path& path) {
  std::vector<est::VolumeEstimate> estimates;
  for_each_line(path, [&](const std::string& line, std::size_t line_no) {
    const json j = parse_json(line, path, line_no);
    est::VolumeEstimate e;
    e.frame_timestamp = j.at("timestamp_s").get<double>();
    e.v_c = j.at("v_c_m3_per_m").get<double>();
    e.quality = parse_quality(j.at("quality").get<std::string>(), path, line_no);
    estimates.push_back(e);
  });
  return estimates;
}

void write_flow_samples_jsonl(const std::filesystem::path& path,
                              std::span<const flow::FlowSample> samples) {
  std::ostringstream out;
  for (const flow::FlowSample& s : samples)
    out << "{\"timestamp_s\":" << fmt(s.timestamp) << ",\"v_delta\":" << fmt(s.v_delta)
        << ",\"m_delta_kg\":" << fmt(s.m_delta) << ",\"v_e_mps\":" << fmt(s.v_e)
        << "}\n";
  write_file(path, out.str());
}

void write_loads_csv(const std::filesystem::path& path,
                     std::span<const flow::LoadRecord> loads) {
  std::ostringstream out;
  out << "load_id,year,region,crop_type,accum_volume,predicted_mass_kg,"
         "actual_mass_kg,duration_s,n_frames,n_low_light,overflow\n";
  for (const flow::LoadRecord& r : loads) {
    out << r.load_id << ',' << r.year << ',' << r.region << ',' << r.crop_type << ','
        << fmt(r.accum_volume) << ',' << fmt(r.predicted_mass_kg) << ',';
    if (r.actual_mass_kg) out << fmt(*r.actual_mass_kg);
    out << ',' << fmt(r.duration_s) << ',' << r.n_frames << ',' << r.n_low_light
        << ',' << (r.overflow ? 1 : 0) << '\n';
  }
  write_file(path, out.str());
}

std::vector<flow::LoadRecord> read_loads_csv(const std::filesystem::path& path) {
  std::vector<flow::LoadRecord> loads;
  bool header_seen = false;
  for_each_line(path, [&](const std::string& line, std::size_t line_no) {
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("load_id,", 0) != 0)
        throw Error(ErrorCategory::io, path.string() + ": missing loads CSV header");
      return;
    }
    const std::vector<std::string> f = split_csv(line);
    if (f.size() < 10) {
      std::ostringstream msg;
      msg << path.string() << ":" << line_no << ": expected at least 10 columns";
      throw Error(ErrorCategory::io, msg.str());
    }
    flow::LoadRecord r;
    r.load_id = f[0];
    r.year = static_cast<int>(to_int(f[1], path, line_no));
    r.region = f[2];
    r.crop_type = f[3];
    r.accum_volume = to_double(f[4], path, line_no);
    r.predicted_mass_kg = to_double(f[5], path, line_no);
    if (!f[6].empty()) r.actual_mass_kg = to_double(f[6], path, line_no);
    r.duration_s = to_double(f[7], path, line_no);
    r.n_frames = static_cast<int>(to_int(f[8], path, line_no));
    r.n_low_light = static_cast<int>(to_int(f[9], path, line_no));
    if (f.size() > 10) r.overflow = to_int(f[10], path, line_no) != 0;
    loads.push_back(std::move(r));
  });
  return loads;
}

void write_cv_csv(const std::filesystem::path& path,
                  std::span<const ana::CVReport> rows) {
  std::ostringstream out;
  out << "year,crop_type,location,n_loads,cv_pct,cv_pct_xfm\n";
  for (const ana::CVReport& r : rows) {
    if (r.year > 0)
      out << r.year;
    else
      out << '*';
    out << ',' << r.crop_type << ',' << r.location << ',' << r.n_loads << ','
        << fmt(r.cv_identity) << ',' << fmt(r.cv_sqrt) << '\n';
  }
  write_file(path, out.str());
}

void write_fit_json(const std::filesystem::path& path, const ana::FitResult& fit) {
  std::ostringstream out;
  out << "{\n"
      << "  \"slope\": " << fmt(fit.slope) << ",\n"
      << "  \"r_squared\": " << fmt(fit.r_squared) << ",\n"
      << "  \"n\": " << fit.n << ",\n"
      << "  \"excluded_overflow\": " << fit.excluded << "\n"
      << "}\n";
  write_file(path, out.str());
}

void write_shift_json(const std::filesystem::path& path, const ana::ShiftReport& rep) {
  std::ostringstream out;
  out << "{\n  \"changepoints\": [";
  for (std::size_t i = 0; i < rep.changepoints.size(); ++i) {
    if (i > 0) out << ", ";
    out << rep.changepoints[i];
  }
  out << "],\n  \"changepoint_timestamps\": [";
  for (std::size_t i = 0; i < rep.changepoint_timestamps.size(); ++i) {
    if (i > 0) out << ", ";
    out << fmt(rep.changepoint_timestamps[i]);
  }
  out << "],\n  \"segment_means\": [";
  for (std::size_t i = 0; i < rep.segment_means.size(); ++i) {
    if (i > 0) out << ", ";
    out << fmt(rep.segment_means[i]);
  }
  out << "],\n  \"penalty\": " << fmt(rep.penalty)
      << ",\n  \"sigma_hat\": " << fmt(rep.sigma_hat) << "\n}\n";
  write_file(path, out.str());
}

void write_shift_trace_csv(const std::filesystem::path& path,
                           std::span<const ana::DensityEstimate> series,
                           const ana::ShiftReport& rep) {
  if (rep.segment_means.size() != rep.changepoints.size() + 1)
    throw Error(ErrorCategory::config,
                "shift report has " + std::to_string(rep.segment_means.size()) +
                    " segment means for " + std::to_string(rep.changepoints.size()) +
                    " changepoints");
  std::ostringstream out;
  out << "load_index,rho,segment_mean\n";
  std::size_t seg = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    while (seg < rep.changepoints.size() && i >= rep.changepoints[seg]) ++seg;
    out << i << ',' << fmt(series[i].rho) << ',' << fmt(rep.segment_means[seg]) << '\n';
  }
  write_file(path, out.str());
}

}  // namespace caneflow::io
