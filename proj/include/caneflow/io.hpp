// File formats for every pipeline stage boundary: frame/pulse/estimate/flow
// JSONL streams, load and CV CSV tables, and fit/shift/truth JSON reports.
// All floating-point output uses 6 significant digits.
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "caneflow/ana.hpp"
#include "caneflow/est.hpp"
#include "caneflow/flow.hpp"
#include "caneflow/sim.hpp"
#include "caneflow/types.hpp"

namespace caneflow::io {

// %.6g rendering used for every floating-point value written to disk.
std::string fmt(double v);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

void write_frames_jsonl(const std::filesystem::path& path,
                        std::span<const PointCloudFrame> frames);
std::vector<PointCloudFrame> read_frames_jsonl(const std::filesystem::path& path);

void write_pulses_jsonl(const std::filesystem::path& path,
                        std::span<const SpeedPulse> pulses);
std::vector<SpeedPulse> read_pulses_jsonl(const std::filesystem::path& path);

void write_truth_json(const std::filesystem::path& path, const sim::RunTruth& truth);
sim::RunTruth read_truth_json(const std::filesystem::path& path);

void write_estimates_jsonl(const std::filesystem::path& path,
                           std::span<const est::VolumeEstimate> estimates);
std::vector<est::VolumeEstimate> read_estimates_jsonl(const std::filesystem::path& path);

void write_flow_samples_jsonl(const std::filesystem::path& path,
                              std::span<const flow::FlowSample> samples);

void write_loads_csv(const std::filesystem::path& path,
                     std::span<const flow::LoadRecord> loads);
std::vector<flow::LoadRecord> read_loads_csv(const std::filesystem::path& path);

void write_cv_csv(const std::filesystem::path& path,
                  std::span<const ana::CVReport> rows);

void write_fit_json(const std::filesystem::path& path, const ana::FitResult& fit);

void write_shift_json(const std::filesystem::path& path, const ana::ShiftReport& rep);
void write_shift_trace_csv(const std::filesystem::path& path,
                           std::span<const ana::DensityEstimate> series,
                           const ana::ShiftReport& rep);

}  // namespace caneflow::io
