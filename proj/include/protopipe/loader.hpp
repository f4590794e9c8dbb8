#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "protopipe/frame.hpp"
#include "protopipe/manifest.hpp"

namespace protopipe {

struct LoaderConfig {
  std::size_t num_threads = 1;
  // Artificial stall added to every file read. Zero disables it.
  std::chrono::microseconds injected_latency{0};
  // When false, workers only read bytes and decoding happens on the calling
  // thread after all reads complete.
  bool decode_after_read = true;
};

Bytes read_file_bytes(const std::filesystem::path& path);

// Loads and decodes `paths` with a pool of cfg.num_threads workers. The
// result is in input order regardless of completion order. On failure the
// error of the lowest-indexed failing path is rethrown (FileNotFound or
// DecodeError naming that path) and remaining work is abandoned.
std::vector<Frame> load_frames_parallel(const std::vector<std::filesystem::path>& paths,
                                        const LoaderConfig& cfg);

struct BenchEntry {
  std::size_t threads = 1;
  double latency_ms = 0.0;
  double median_ms = 0.0;
  double speedup = 1.0;  // baseline median / this median
};

struct BenchReport {
  std::size_t frames = 0;
  std::size_t repetitions = 0;
  std::vector<BenchEntry> configs;
};

// Times loading every frame of every video once per repetition for each
// config. The first config is the baseline for the speedup column.
BenchReport bench_loader(const DatasetManifest& manifest, const std::vector<LoaderConfig>& configs,
                         std::size_t repetitions);

nlohmann::json bench_report_to_json(const BenchReport& report);

// Human-readable table in the "median (speedup x)" style, e.g. "86.0 (2.7x)".
std::string format_bench_table(const BenchReport& report);

}  // namespace protopipe
