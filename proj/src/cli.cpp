#include "protopipe/cli.hpp"

#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "protopipe/adaptation.hpp"
#include "protopipe/error.hpp"
#include "protopipe/loader.hpp"
#include "protopipe/manifest.hpp"
#include "protopipe/pipeline.hpp"
#include "protopipe/synthetic.hpp"

namespace protopipe {
namespace {

using nlohmann::json;

// Errors raised while reading flags, configs or weights.
struct ConfigStageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename F>
auto config_stage(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw ConfigStageError(e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

std::filesystem::path manifest_path(const std::filesystem::path& dataset) {
  return std::filesystem::is_directory(dataset) ? dataset / "manifest.json" : dataset;
}

PipelineConfig read_config(const std::string& path, std::optional<std::uint64_t> seed) {
  return config_stage([&] {
    PipelineConfig cfg = path.empty() ? PipelineConfig{} : load_pipeline_config(path);
    apply_seed_override(cfg, seed);
    return cfg;
  });
}

std::vector<std::size_t> parse_thread_list(const std::string& list) {
  std::vector<std::size_t> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || v < 1) {
      throw Error(ErrorCode::kInvalidArgument, "bad thread count '" + item + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorCode::kInvalidArgument, "no thread counts given");
  return out;
}

struct GenArgs {
  std::string out;
  SyntheticSpec spec;
  std::string scenario = "standard";
};

struct PersonalizeArgs {
  std::string dataset, user, config, out, audit;
  std::optional<std::uint64_t> seed;
};

struct RecognizeArgs {
  std::string prototypes, dataset, video, out, config;
  std::optional<std::uint64_t> seed;
};

struct EvaluateArgs {
  std::string dataset, config, out;
  std::string ablation = "baseline,adapt,uniform,filter";
  std::optional<std::uint64_t> seed;
};

struct BenchArgs {
  std::string dataset, out;
  std::string threads = "1,4,16";
  double latency_ms = 0.0;
  std::size_t reps = 3;
};

struct AdapterArgs {
  std::string out;
  std::string kind = "random";
  std::size_t d = 64, heads = 1, d_ff = 0;
  std::uint64_t seed = 5;
  double strength = 1.0;
};

int cmd_gen_synthetic(const GenArgs& a, std::ostream& out) {
  SyntheticSpec spec = a.spec;
  spec.scenario = config_stage([&] {
    if (a.scenario == "standard") return Scenario::kStandard;
    if (a.scenario == "ablation") return Scenario::kAblation;
    throw Error(ErrorCode::kInvalidArgument, "unknown scenario '" + a.scenario + "'");
  });
  const auto ds = generate_synthetic_dataset(spec, a.out);
  out << "wrote " << ds.manifest.total_frames() << " frames for " << ds.manifest.users.size()
      << " users to " << a.out << '\n';
  return kExitOk;
}

int cmd_personalize(const PersonalizeArgs& a, std::ostream& out, std::ostream& err) {
  const PipelineConfig cfg = read_config(a.config, a.seed);
  const DatasetManifest manifest = load_manifest(manifest_path(a.dataset));
  const PipelineResources res = config_stage([&] { return load_resources(cfg, &manifest); });
  const auto result = run_personalize(manifest, a.user, cfg, res);
  for (const auto& entry : result.audit) {
    if (entry.override_kept) {
      err << "warning: every clip of a class was invalid; kept " << entry.video_id << " clip at "
          << entry.clip_start << " (" << entry.invalid << "/" << entry.length << " invalid)\n";
    }
  }
  write_json(a.out, prototypes_to_json(result.prototypes));
  if (!a.audit.empty()) {
    std::ofstream log(a.audit);
    if (!log) throw Error(ErrorCode::kIoError, "cannot write " + a.audit);
    for (const auto& entry : result.audit) log << audit_to_json(entry).dump() << '\n';
  }
  out << "prototypes for " << result.prototypes.labels.size() << " classes written to " << a.out
      << '\n';
  return kExitOk;
}

int cmd_recognize(const RecognizeArgs& a, std::ostream& out, std::ostream& err) {
  const PipelineConfig cfg = read_config(a.config, a.seed);
  const Prototypes protos = config_stage([&] {
    std::ifstream in(a.prototypes);
    if (!in) throw Error(ErrorCode::kFileNotFound, a.prototypes);
    try {
      return prototypes_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kParseError, a.prototypes + ": " + e.what());
    }
  });
  const DatasetManifest manifest = load_manifest(manifest_path(a.dataset));
  const PipelineResources res = config_stage([&] { return load_resources(cfg, &manifest); });
  if (protos.config_digest != cfg.digest()) {
    err << "warning: prototypes were built with config " << protos.config_digest
        << ", recognizing with " << cfg.digest() << '\n';
  }
  const auto [video, label] = manifest.find_video(a.video);
  FeatureExtractor features(manifest, res.embedder, cfg.edge_filter, loader_config(cfg));
  const auto pred = recognize_video(*video, protos, cfg.sampler.clip_length, features);
  write_json(a.out, predictions_to_json(pred, protos.labels));
  out << pred.per_frame.size() << " frame predictions written to " << a.out << '\n';
  return kExitOk;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const PipelineConfig cfg = read_config(a.config, a.seed);
  const auto arms = config_stage([&] { return parse_arms(a.ablation); });
  const DatasetManifest manifest = load_manifest(manifest_path(a.dataset));
  config_stage([&] { return load_resources(cfg, &manifest); });
  const auto report = evaluate(manifest, cfg, arms);
  write_json(a.out, evaluation_to_json(report));
  for (const auto& arm : report.arms) {
    out << to_string(arm.arm) << ": frame accuracy " << arm.accuracy << " over " << arm.frames
        << " frames\n";
  }
  return kExitOk;
}

int cmd_bench_loader(const BenchArgs& a, std::ostream& out) {
  std::vector<LoaderConfig> configs = config_stage([&] {
    if (a.reps < 1) throw Error(ErrorCode::kInvalidArgument, "--reps must be >= 1");
    if (a.latency_ms < 0) throw Error(ErrorCode::kInvalidArgument, "--latency-ms must be >= 0");
    std::vector<LoaderConfig> cfgs;
    for (std::size_t t : parse_thread_list(a.threads)) {
      LoaderConfig lc;
      lc.num_threads = t;
      lc.injected_latency = std::chrono::microseconds(static_cast<long long>(a.latency_ms * 1000.0));
      cfgs.push_back(lc);
    }
    return cfgs;
  });
  const DatasetManifest manifest = load_manifest(manifest_path(a.dataset));
  const auto report = bench_loader(manifest, configs, a.reps);
  if (!a.out.empty()) write_json(a.out, bench_report_to_json(report));
  out << format_bench_table(report);
  return kExitOk;
}

int cmd_init_adapter(const AdapterArgs& a, std::ostream& out) {
  const auto weights = config_stage([&] {
    const std::size_t d_ff = a.d_ff == 0 ? 2 * a.d : a.d_ff;
    if (a.kind == "random") return random_transformer_weights(a.d, a.heads, d_ff, a.seed);
    if (a.kind == "zero") return zero_transformer_weights(a.d, a.heads, d_ff);
    if (a.kind == "centering") return centering_transformer_weights(a.d, d_ff, a.strength);
    throw Error(ErrorCode::kInvalidArgument, "unknown adapter kind '" + a.kind + "'");
  });
  write_json(a.out, transformer_weights_to_json(weights));
  out << a.kind << " adapter (d=" << weights.d << ", h=" << weights.h << ", d_ff=" << weights.d_ff
      << ") written to " << a.out << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot video object recognition with prototype adaptation"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Generate a synthetic clean/clutter dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--users", gen.spec.num_users, "Number of users")->capture_default_str();
  gen_cmd->add_option("--objects", gen.spec.objects_per_user, "Objects per user")->capture_default_str();
  gen_cmd->add_option("--videos", gen.spec.videos_per_object,
                      "Clean and clutter videos per object (each)")->capture_default_str();
  gen_cmd->add_option("--frames", gen.spec.frames_per_video, "Frames per video")->capture_default_str();
  gen_cmd->add_option("--size", gen.spec.frame_size, "Frame width and height")->capture_default_str();
  gen_cmd->add_option("--blank-fraction", gen.spec.blank_fraction,
                      "Fraction of blank frames per clean video")->capture_default_str();
  gen_cmd->add_option("--seed", gen.spec.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--scenario", gen.scenario, "standard or ablation")->capture_default_str();

  PersonalizeArgs pers;
  auto* pers_cmd = app.add_subcommand("personalize", "Build class prototypes for one user");
  pers_cmd->add_option("--dataset", pers.dataset, "Manifest file or dataset directory")->required();
  pers_cmd->add_option("--user", pers.user, "User id")->required();
  pers_cmd->add_option("--config", pers.config, "Pipeline config JSON");
  pers_cmd->add_option("--out", pers.out, "Prototypes JSON to write")->required();
  pers_cmd->add_option("--audit", pers.audit, "Clip filter audit log (JSON lines)");
  pers_cmd->add_option("--seed", pers.seed, "Seed (overrides PROTOPIPE_SEED and config)");

  RecognizeArgs rec;
  auto* rec_cmd = app.add_subcommand("recognize", "Classify every frame of a clutter video");
  rec_cmd->add_option("--prototypes", rec.prototypes, "Prototypes JSON")->required();
  rec_cmd->add_option("--dataset", rec.dataset, "Manifest file or dataset directory")->required();
  rec_cmd->add_option("--video", rec.video, "Video id")->required();
  rec_cmd->add_option("--out", rec.out, "Predictions JSON to write")->required();
  rec_cmd->add_option("--config", rec.config, "Pipeline config JSON");
  rec_cmd->add_option("--seed", rec.seed, "Seed (overrides PROTOPIPE_SEED and config)");

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Per-user frame accuracy for each ablation arm");
  eval_cmd->add_option("--dataset", eval.dataset, "Manifest file or dataset directory")->required();
  eval_cmd->add_option("--config", eval.config, "Pipeline config JSON");
  eval_cmd->add_option("--ablation", eval.ablation, "Comma list of baseline,adapt,uniform,filter")
      ->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "Report JSON to write")->required();
  eval_cmd->add_option("--seed", eval.seed, "Seed (overrides PROTOPIPE_SEED and config)");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench-loader", "Time the parallel frame loader");
  bench_cmd->add_option("--dataset", bench.dataset, "Manifest file or dataset directory")->required();
  bench_cmd->add_option("--threads", bench.threads, "Comma list of thread counts; first is baseline")
      ->capture_default_str();
  bench_cmd->add_option("--latency-ms", bench.latency_ms, "Injected latency per file read")
      ->capture_default_str();
  bench_cmd->add_option("--reps", bench.reps, "Repetitions per config")->capture_default_str();
  bench_cmd->add_option("--out", bench.out, "Report JSON to write");

  AdapterArgs adapter;
  auto* adapter_cmd = app.add_subcommand("init-adapter", "Write transformer adapter weights");
  adapter_cmd->add_option("--out", adapter.out, "Weights JSON to write")->required();
  adapter_cmd->add_option("--kind", adapter.kind, "random, zero or centering")->capture_default_str();
  adapter_cmd->add_option("--d", adapter.d, "Model dimension")->capture_default_str();
  adapter_cmd->add_option("--heads", adapter.heads, "Attention heads")->capture_default_str();
  adapter_cmd->add_option("--d-ff", adapter.d_ff, "FFN hidden size (default 2d)");
  adapter_cmd->add_option("--seed", adapter.seed, "Seed for random weights")->capture_default_str();
  adapter_cmd->add_option("--strength", adapter.strength, "Mean removal for centering")->capture_default_str();

  std::vector<std::string> storage{"protopipe"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }

  try {
    if (*gen_cmd) return cmd_gen_synthetic(gen, out);
    if (*pers_cmd) return cmd_personalize(pers, out, err);
    if (*rec_cmd) return cmd_recognize(rec, out, err);
    if (*eval_cmd) return cmd_evaluate(eval, out);
    if (*bench_cmd) return cmd_bench_loader(bench, out);
    if (*adapter_cmd) return cmd_init_adapter(adapter, out);
  } catch (const ConfigStageError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kDimensionMismatch ? kExitConfigError : kExitDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  }
  return kExitConfigError;
}

}  // namespace protopipe
