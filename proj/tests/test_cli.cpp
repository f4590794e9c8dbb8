#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "protopipe/cli.hpp"
#include "protopipe/manifest.hpp"
#include "protopipe/synthetic.hpp"
#include "test_util.hpp"

using namespace protopipe;
using nlohmann::json;
using protopipe::testing::read_text;
using protopipe::testing::TempDir;
using protopipe::testing::write_text;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

json load(const std::filesystem::path& p) { return json::parse(read_text(p)); }

// Minimal structural schema: every listed key present with the given type.
enum class T { kString, kInt, kNumber, kBool, kArray, kObject };

bool has_type(const json& j, T t) {
  switch (t) {
    case T::kString: return j.is_string();
    case T::kInt: return j.is_number_integer();
    case T::kNumber: return j.is_number();
    case T::kBool: return j.is_boolean();
    case T::kArray: return j.is_array();
    case T::kObject: return j.is_object();
  }
  return false;
}

void check_schema(const json& j, const std::vector<std::pair<std::string, T>>& fields) {
  REQUIRE(j.is_object());
  CHECK(j.size() == fields.size());
  for (const auto& [key, type] : fields) {
    CAPTURE(key);
    REQUIRE(j.contains(key));
    CHECK(has_type(j.at(key), type));
  }
}

void check_number_rows(const json& rows, std::size_t n, std::size_t d) {
  REQUIRE(rows.size() == n);
  for (const auto& r : rows) {
    REQUIRE(r.size() == d);
    for (const auto& x : r) CHECK(x.is_number());
  }
}

void check_prototypes_schema(const json& j) {
  check_schema(j, {{"user_id", T::kString}, {"labels", T::kArray}, {"dim", T::kInt},
                   {"raw", T::kArray}, {"adapted", T::kArray}, {"config_digest", T::kString}});
  const auto n = j["labels"].size();
  const auto d = j["dim"].get<std::size_t>();
  check_number_rows(j["raw"], n, d);
  check_number_rows(j["adapted"], n, d);
  CHECK(j["config_digest"].get<std::string>().size() == 16);
}

void check_predictions_schema(const json& j) {
  check_schema(j, {{"video_id", T::kString}, {"labels", T::kArray}, {"per_frame", T::kArray}});
  for (const auto& f : j["per_frame"]) {
    check_schema(f, {{"pred", T::kString}, {"scores", T::kArray}});
    CHECK(f["scores"].size() == j["labels"].size());
  }
}

void check_evaluation_schema(const json& j) {
  check_schema(j, {{"config_digest", T::kString}, {"arms", T::kArray}, {"margins", T::kArray}});
  for (const auto& a : j["arms"]) {
    check_schema(a, {{"arm", T::kString}, {"config_digest", T::kString}, {"accuracy", T::kNumber},
                     {"micro_accuracy", T::kNumber}, {"frames", T::kInt},
                     {"clips_removed", T::kInt}, {"overrides", T::kInt}, {"per_user", T::kArray}});
    for (const auto& u : a["per_user"]) {
      check_schema(u, {{"user_id", T::kString}, {"accuracy", T::kNumber}, {"frames", T::kInt}});
    }
  }
  for (const auto& m : j["margins"]) {
    check_schema(m, {{"from", T::kString}, {"to", T::kString}, {"delta", T::kNumber}});
  }
}

void check_bench_schema(const json& j) {
  check_schema(j, {{"configs", T::kArray}});
  for (const auto& c : j["configs"]) {
    check_schema(c, {{"threads", T::kInt}, {"latency_ms", T::kNumber}, {"median_ms", T::kNumber},
                     {"speedup", T::kNumber}});
  }
}

void check_audit_schema(const std::string& lines) {
  std::istringstream in(lines);
  std::string line;
  while (std::getline(in, line)) {
    check_schema(json::parse(line), {{"video_id", T::kString}, {"clip_start", T::kInt},
                                     {"invalid", T::kInt}, {"L", T::kInt}, {"removed", T::kBool},
                                     {"override", T::kBool}});
  }
}

// Small dataset written once per test case.
struct Dataset {
  TempDir dir{"cli"};
  std::filesystem::path data = dir.path() / "data";

  Dataset() {
    const auto r = run({"gen-synthetic", "--out", data.string(), "--users", "2", "--objects", "3",
                        "--videos", "1", "--frames", "16", "--size", "32"});
    REQUIRE(r.code == kExitOk);
  }
  std::string path(const std::string& name) const { return (dir.path() / name).string(); }
};

}  // namespace

TEST_CASE("gen-synthetic") {
  Dataset ds;
  const auto m = load_manifest(ds.data / "manifest.json");
  CHECK(m.users.size() == 2);
  CHECK(load_blank_sidecar(ds.data / "blank_frames.json").size() == 6);

  const auto again = ds.path("again");
  CHECK(run({"gen-synthetic", "--out", again, "--users", "2", "--objects", "3", "--videos", "1",
             "--frames", "16", "--size", "32"})
            .code == kExitOk);
  CHECK(protopipe::testing::trees_identical(ds.data, again));

  const auto clean = ds.path("clean");
  CHECK(run({"gen-synthetic", "--out", clean, "--users", "1", "--frames", "8", "--size", "16",
             "--blank-fraction", "0"})
            .code == kExitOk);
  CHECK(load(std::filesystem::path(clean) / "blank_frames.json").empty());

  CHECK(run({"gen-synthetic", "--out", ds.path("x"), "--scenario", "odd"}).code == kExitConfigError);
  CHECK(run({"gen-synthetic", "--out", ds.path("y"), "--objects", "1"}).code != kExitOk);
}

TEST_CASE("personalize") {
  Dataset ds;
  const auto out = ds.path("protos.json");
  const auto audit = ds.path("audit.jsonl");
  auto r = run({"personalize", "--dataset", ds.data.string(), "--user", "user01", "--out", out,
                "--audit", audit});
  REQUIRE(r.code == kExitOk);
  const auto doc = load(out);
  check_prototypes_schema(doc);
  CHECK(doc["labels"].size() == 3);
  CHECK(doc["user_id"] == "user01");
  CHECK(doc["raw"] == doc["adapted"]);  // no config: adapter "none"
  check_audit_schema(read_text(audit));

  // Manifest path works as well as the directory.
  const auto out2 = ds.path("protos2.json");
  CHECK(run({"personalize", "--dataset", (ds.data / "manifest.json").string(), "--user", "user01",
             "--out", out2, "--audit", ds.path("audit2.jsonl")})
            .code == kExitOk);
  CHECK(read_text(out) == read_text(out2));
  CHECK(read_text(audit) == read_text(ds.path("audit2.jsonl")));

  r = run({"personalize", "--dataset", ds.data.string(), "--user", "ghost", "--out", out});
  CHECK(r.code == kExitDataError);
  CHECK(r.err.find("ghost") != std::string::npos);

  CHECK(run({"personalize", "--dataset", ds.path("nowhere"), "--user", "user00", "--out", out}).code ==
        kExitDataError);
  CHECK(run({"personalize", "--dataset", ds.data.string(), "--out", out}).code == kExitConfigError);
}

TEST_CASE("personalize with config and adapter") {
  Dataset ds;
  const auto weights = ds.path("adapter.json");
  REQUIRE(run({"init-adapter", "--out", weights, "--kind", "random", "--d", "16"}).code == kExitOk);
  write_text(ds.path("cfg.json"),
             R"({"embedder":{"dim":16},"sampler":{"clip_length":4},"adapter":"adapter.json"})");
  const auto out = ds.path("protos.json");
  REQUIRE(run({"personalize", "--dataset", ds.data.string(), "--user", "user00", "--config",
               ds.path("cfg.json"), "--out", out})
              .code == kExitOk);
  auto doc = load(out);
  check_prototypes_schema(doc);
  CHECK(doc["dim"] == 16);
  CHECK(doc["raw"] != doc["adapted"]);

  write_text(ds.path("none.json"), R"({"embedder":{"dim":16},"adapter":"none"})");
  REQUIRE(run({"personalize", "--dataset", ds.data.string(), "--user", "user00", "--config",
               ds.path("none.json"), "--out", out})
              .code == kExitOk);
  doc = load(out);
  CHECK(doc["raw"] == doc["adapted"]);

  // Adapter d=16 against the default 64-dim embedder.
  write_text(ds.path("mismatch.json"), R"({"adapter":"adapter.json"})");
  auto r = run({"personalize", "--dataset", ds.data.string(), "--user", "user00", "--config",
                ds.path("mismatch.json"), "--out", out});
  CHECK(r.code == kExitConfigError);
  CHECK(r.err.find("DimensionMismatch") != std::string::npos);

  write_text(ds.path("broken.json"), "{not json");
  CHECK(run({"personalize", "--dataset", ds.data.string(), "--user", "user00", "--config",
             ds.path("broken.json"), "--out", out})
            .code == kExitConfigError);
  write_text(ds.path("missing_adapter.json"), R"({"adapter":"nope.json"})");
  CHECK(run({"personalize", "--dataset", ds.data.string(), "--user", "user00", "--config",
             ds.path("missing_adapter.json"), "--out", out})
            .code == kExitConfigError);
}

TEST_CASE("recognize") {
  Dataset ds;
  const auto protos = ds.path("protos.json");
  REQUIRE(run({"personalize", "--dataset", ds.data.string(), "--user", "user00", "--out", protos})
              .code == kExitOk);
  const std::string video = "u00_o01_clutter0";
  const auto a = ds.path("pred_a.json"), b = ds.path("pred_b.json");
  auto r = run({"recognize", "--prototypes", protos, "--dataset", ds.data.string(), "--video", video,
                "--out", a});
  REQUIRE(r.code == kExitOk);
  CHECK(r.err.empty());
  REQUIRE(run({"recognize", "--prototypes", protos, "--dataset", ds.data.string(), "--video", video,
               "--out", b})
              .code == kExitOk);
  CHECK(read_text(a) == read_text(b));
  const auto doc = load(a);
  check_predictions_schema(doc);
  CHECK(doc["per_frame"].size() == 16);
  CHECK(doc["video_id"] == video);

  CHECK(run({"recognize", "--prototypes", protos, "--dataset", ds.data.string(), "--video", "nope",
             "--out", a})
            .code == kExitDataError);

  // Prototypes from a 16-dim embedder, recognized with the default 64-dim one.
  write_text(ds.path("small.json"), R"({"embedder":{"dim":16}})");
  const auto small = ds.path("small_protos.json");
  REQUIRE(run({"personalize", "--dataset", ds.data.string(), "--user", "user00", "--config",
               ds.path("small.json"), "--out", small})
              .code == kExitOk);
  r = run({"recognize", "--prototypes", small, "--dataset", ds.data.string(), "--video", video,
           "--out", a});
  CHECK(r.code == kExitConfigError);
  CHECK(r.err.find("DimensionMismatch") != std::string::npos);

  // Same config on both sides: no digest warning.
  r = run({"recognize", "--prototypes", small, "--dataset", ds.data.string(), "--video", video,
           "--config", ds.path("small.json"), "--out", a});
  CHECK(r.code == kExitOk);
  CHECK(r.err.empty());
}

TEST_CASE("evaluate") {
  Dataset ds;
  const auto a = ds.path("eval_a.json"), b = ds.path("eval_b.json");
  REQUIRE(run({"evaluate", "--dataset", ds.data.string(), "--out", a}).code == kExitOk);
  REQUIRE(run({"evaluate", "--dataset", ds.data.string(), "--out", b}).code == kExitOk);
  CHECK(read_text(a) == read_text(b));
  auto doc = load(a);
  check_evaluation_schema(doc);
  CHECK(doc["arms"].size() == 4);
  CHECK(doc["arms"][0]["per_user"].size() == 2);

  REQUIRE(run({"evaluate", "--dataset", ds.data.string(), "--ablation", "baseline", "--out", a}).code ==
          kExitOk);
  doc = load(a);
  check_evaluation_schema(doc);
  CHECK(doc["arms"].size() == 1);
  CHECK(doc["margins"].empty());

  CHECK(run({"evaluate", "--dataset", ds.data.string(), "--ablation", "best", "--out", a}).code ==
        kExitConfigError);

  // Seed changes the random baseline arm; flag beats config.
  write_text(ds.path("seeded.json"), R"({"seed":5})");
  REQUIRE(run({"evaluate", "--dataset", ds.data.string(), "--ablation", "baseline", "--config",
               ds.path("seeded.json"), "--out", a})
              .code == kExitOk);
  REQUIRE(run({"evaluate", "--dataset", ds.data.string(), "--ablation", "baseline", "--config",
               ds.path("seeded.json"), "--seed", "5", "--out", b})
              .code == kExitOk);
  CHECK(read_text(a) == read_text(b));
  REQUIRE(run({"evaluate", "--dataset", ds.data.string(), "--ablation", "baseline", "--config",
               ds.path("seeded.json"), "--seed", "6", "--out", b})
              .code == kExitOk);
  CHECK(load(a)["config_digest"] != load(b)["config_digest"]);
}

TEST_CASE("bench-loader") {
  Dataset ds;
  const auto out = ds.path("bench.json");
  auto r = run({"bench-loader", "--dataset", ds.data.string(), "--threads", "1", "--reps", "1",
                "--out", out});
  REQUIRE(r.code == kExitOk);
  auto doc = load(out);
  check_bench_schema(doc);
  CHECK(doc["configs"].size() == 1);
  CHECK(doc["configs"][0]["speedup"] == 1.0);
  CHECK(r.out.find("(1.00x)") != std::string::npos);

  REQUIRE(run({"bench-loader", "--dataset", ds.data.string(), "--threads", "1,4", "--latency-ms",
               "0.5", "--reps", "1", "--out", out})
              .code == kExitOk);
  doc = load(out);
  check_bench_schema(doc);
  CHECK(doc["configs"][1]["threads"] == 4);
  CHECK(doc["configs"][1]["latency_ms"] == 0.5);

  CHECK(run({"bench-loader", "--dataset", ds.data.string(), "--threads", "0"}).code ==
        kExitConfigError);
  CHECK(run({"bench-loader", "--dataset", ds.data.string(), "--threads", "two"}).code ==
        kExitConfigError);
}

TEST_CASE("init-adapter writes loadable weights") {
  TempDir dir("cli_adapter");
  for (std::string kind : {"random", "zero", "centering"}) {
    const auto path = (dir.path() / (kind + ".json")).string();
    REQUIRE(run({"init-adapter", "--out", path, "--kind", kind, "--d", "8", "--heads", "2"}).code ==
            kExitOk);
    const auto doc = load(path);
    CHECK(doc["d"] == 8);
    CHECK(doc["d_ff"] == 16);
  }
  CHECK(run({"init-adapter", "--out", (dir.path() / "x.json").string(), "--d", "8", "--heads", "3"})
            .code == kExitConfigError);
  CHECK(run({"init-adapter", "--out", (dir.path() / "x.json").string(), "--kind", "big"}).code ==
        kExitConfigError);
}

TEST_CASE("usage errors") {
  CHECK(run({}).code == kExitConfigError);
  CHECK(run({"launch"}).code == kExitConfigError);
  CHECK(run({"evaluate", "--dataset"}).code == kExitConfigError);
  const auto help = run({"--help"});
  CHECK(help.code == kExitOk);
  CHECK(help.out.find("personalize") != std::string::npos);
}
