#include <chrono>
#include <random>

#include "doctest.h"
#include "protopipe/error.hpp"
#include "protopipe/loader.hpp"
#include "test_util.hpp"

using namespace protopipe;
namespace fs = std::filesystem;

namespace {

struct Corpus {
  testing::TempDir dir{"loader"};
  std::vector<fs::path> paths;
  std::vector<Frame> frames;

  explicit Corpus(std::size_t n, std::uint64_t seed = 1) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> dim(3, 12);
    for (std::size_t i = 0; i < n; ++i) {
      Frame f = testing::random_frame(rng, dim(rng), dim(rng), i % 3 ? 3 : 1);
      const fs::path p = dir.path() / ("f" + std::to_string(i) + ".pnm");
      const Bytes b = encode_pnm(f);
      testing::write_text(p, std::string(b.begin(), b.end()));
      paths.push_back(p);
      frames.push_back(std::move(f));
    }
  }
};

std::vector<Frame> sequential(const std::vector<fs::path>& paths) {
  std::vector<Frame> out;
  for (const auto& p : paths) out.push_back(decode_pnm(read_file_bytes(p)));
  return out;
}

double millis(auto&& f) {
  const auto start = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

TEST_CASE("single thread matches a plain loop") {
  Corpus c(8);
  LoaderConfig cfg;
  cfg.num_threads = 1;
  CHECK(load_frames_parallel(c.paths, cfg) == sequential(c.paths));
  CHECK(load_frames_parallel(c.paths, cfg) == c.frames);
}

TEST_CASE("parallel output is identical to sequential for any thread count") {
  Corpus c(40, 9);
  const auto expected = sequential(c.paths);
  for (std::size_t threads : {1, 2, 3, 7, 16, 64}) {
    for (bool decode_in_worker : {true, false}) {
      LoaderConfig cfg;
      cfg.num_threads = threads;
      cfg.decode_after_read = decode_in_worker;
      CHECK(load_frames_parallel(c.paths, cfg) == expected);
    }
  }
}

TEST_CASE("ordering survives shuffled completion") {
  // Latency makes workers finish in an order unrelated to the input order.
  Corpus c(24, 4);
  LoaderConfig cfg;
  cfg.num_threads = 5;
  cfg.injected_latency = std::chrono::microseconds(300);
  CHECK(load_frames_parallel(c.paths, cfg) == c.frames);
  CHECK(load_frames_parallel({}, cfg).empty());
}

TEST_CASE("injected latency is hidden by threads") {
  Corpus c(300, 2);
  LoaderConfig one;
  one.injected_latency = std::chrono::milliseconds(1);
  LoaderConfig many = one;
  many.num_threads = 16;
  std::vector<Frame> a, b;
  const double t1 = millis([&] { a = load_frames_parallel(c.paths, one); });
  const double t16 = millis([&] { b = load_frames_parallel(c.paths, many); });
  MESSAGE("1 thread: " << t1 << " ms, 16 threads: " << t16 << " ms");
  CHECK(t1 >= 300.0);
  CHECK(t16 <= 60.0);
  CHECK(a == b);
}

TEST_CASE("first error reports the offending path") {
  Corpus c(10, 3);
  auto paths = c.paths;
  paths[6] = c.dir.path() / "missing.pnm";
  testing::write_text(c.dir.path() / "junk.pnm", "not an image");
  paths[8] = c.dir.path() / "junk.pnm";
  for (std::size_t threads : {1, 4}) {
    LoaderConfig cfg;
    cfg.num_threads = threads;
    try {
      load_frames_parallel(paths, cfg);
      FAIL("expected FileNotFound");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kFileNotFound);
      CHECK(std::string(e.what()).find("missing.pnm") != std::string::npos);
    }
  }
  paths[6] = c.paths[6];
  try {
    load_frames_parallel(paths, LoaderConfig{});
    FAIL("expected DecodeError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDecodeError);
    CHECK(std::string(e.what()).find("junk.pnm") != std::string::npos);
  }
  LoaderConfig zero;
  zero.num_threads = 0;
  CHECK_THROWS_AS(load_frames_parallel(paths, zero), Error);
}

TEST_CASE("bench report") {
  Corpus c(30, 5);
  DatasetManifest m;
  m.root = c.dir.path();
  VideoRecord v;
  v.video_id = "v";
  for (const auto& p : c.paths) v.frame_paths.push_back(p.filename().string());
  m.users.push_back({"u", {{"a", {v}}}});

  LoaderConfig base;
  base.injected_latency = std::chrono::milliseconds(1);
  const BenchReport single = bench_loader(m, {base}, 1);
  REQUIRE(single.configs.size() == 1);
  CHECK(single.configs[0].speedup == 1.0);
  CHECK(single.frames == 30);

  LoaderConfig wide = base;
  wide.num_threads = 8;
  const BenchReport two = bench_loader(m, {base, wide}, 3);
  CHECK(two.configs[1].speedup > 2.0);
  const auto j = bench_report_to_json(two);
  CHECK(j["configs"].size() == 2);
  CHECK(j["configs"][1]["threads"] == 8);
  CHECK(j["configs"][0]["latency_ms"] == 1.0);
  CHECK(format_bench_table(two).find("x)") != std::string::npos);
  CHECK_THROWS_AS(bench_loader(m, {base}, 0), Error);
}
