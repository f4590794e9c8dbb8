#include "protopipe/loader.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iterator>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "protopipe/error.hpp"

namespace protopipe {

Bytes read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileNotFound, path.string());
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIoError, "read failed for " + path.string());
  return bytes;
}

namespace {

Frame decode_named(const Bytes& bytes, const std::filesystem::path& path) {
  try {
    return decode_pnm(bytes);
  } catch (const Error& e) {
    throw Error(ErrorCode::kDecodeError, path.string() + ": " + e.what());
  }
}

// Records the failure with the smallest index so the reported path does not
// depend on thread scheduling among the files that were attempted.
class FirstFailure {
 public:
  void record(std::size_t index, std::exception_ptr error) {
    std::lock_guard lock(mu_);
    if (!index_ || index < *index_) {
      index_ = index;
      error_ = std::move(error);
    }
    failed_.store(true, std::memory_order_relaxed);
  }
  bool failed() const { return failed_.load(std::memory_order_relaxed); }
  void rethrow_if_failed() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mu_;
  std::optional<std::size_t> index_;
  std::exception_ptr error_;
  std::atomic<bool> failed_{false};
};

}  // namespace

std::vector<Frame> load_frames_parallel(const std::vector<std::filesystem::path>& paths,
                                        const LoaderConfig& cfg) {
  if (cfg.num_threads < 1) throw Error(ErrorCode::kInvalidArgument, "num_threads must be >= 1");

  std::vector<Bytes> raw(cfg.decode_after_read ? 0 : paths.size());
  std::vector<Frame> frames(paths.size());
  FirstFailure failure;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      if (failure.failed()) return;
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= paths.size()) return;
      try {
        Bytes bytes = read_file_bytes(paths[i]);
        if (cfg.injected_latency.count() > 0) std::this_thread::sleep_for(cfg.injected_latency);
        if (cfg.decode_after_read) {
          frames[i] = decode_named(bytes, paths[i]);
        } else {
          raw[i] = std::move(bytes);
        }
      } catch (...) {
        failure.record(i, std::current_exception());
      }
    }
  };

  const std::size_t workers = std::min(cfg.num_threads, std::max<std::size_t>(paths.size(), 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
  }
  failure.rethrow_if_failed();

  if (!cfg.decode_after_read) {
    for (std::size_t i = 0; i < paths.size(); ++i) frames[i] = decode_named(raw[i], paths[i]);
  }
  return frames;
}

BenchReport bench_loader(const DatasetManifest& manifest, const std::vector<LoaderConfig>& configs,
                         std::size_t repetitions) {
  if (repetitions < 1) throw Error(ErrorCode::kInvalidArgument, "repetitions must be >= 1");
  if (configs.empty()) throw Error(ErrorCode::kInvalidArgument, "no loader configs given");

  std::vector<std::filesystem::path> paths;
  for (const auto& u : manifest.users)
    for (const auto& o : u.objects)
      for (const auto& v : o.videos) {
        auto files = manifest.frame_files(v);
        paths.insert(paths.end(), files.begin(), files.end());
      }

  BenchReport report;
  report.frames = paths.size();
  report.repetitions = repetitions;
  for (const auto& cfg : configs) {
    std::vector<double> times;
    for (std::size_t r = 0; r < repetitions; ++r) {
      const auto start = std::chrono::steady_clock::now();
      auto frames = load_frames_parallel(paths, cfg);
      const auto stop = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    }
    std::sort(times.begin(), times.end());
    const std::size_t n = times.size();
    const double median = n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
    BenchEntry entry;
    entry.threads = cfg.num_threads;
    entry.latency_ms = std::chrono::duration<double, std::milli>(cfg.injected_latency).count();
    entry.median_ms = median;
    report.configs.push_back(entry);
  }
  const double baseline = report.configs.front().median_ms;
  for (auto& e : report.configs) {
    e.speedup = e.median_ms > 0.0 ? baseline / e.median_ms : std::numeric_limits<double>::infinity();
  }
  return report;
}

nlohmann::json bench_report_to_json(const BenchReport& report) {
  nlohmann::json configs = nlohmann::json::array();
  for (const auto& e : report.configs) {
    configs.push_back({{"threads", e.threads},
                       {"latency_ms", e.latency_ms},
                       {"median_ms", e.median_ms},
                       {"speedup", e.speedup}});
  }
  return {{"configs", std::move(configs)}};
}

std::string format_bench_table(const BenchReport& report) {
  std::ostringstream out;
  out << "frames=" << report.frames << " repetitions=" << report.repetitions << '\n';
  out << "threads  latency_ms  median_ms (speedup)\n";
  for (const auto& e : report.configs) {
    char line[128];
    std::snprintf(line, sizeof line, "%7zu  %10.3f  %.1f (%.2fx)\n", e.threads, e.latency_ms,
                  e.median_ms, e.speedup);
    out << line;
  }
  return out.str();
}

}  // namespace protopipe
