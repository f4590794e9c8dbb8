#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "protopipe/adaptation.hpp"
#include "protopipe/clip_sampling.hpp"
#include "protopipe/frame_validity.hpp"
#include "protopipe/protonet.hpp"

namespace protopipe {

enum class EmbedderKind { kPatchProjection, kPrecomputed };

struct EmbedderConfig {
  EmbedderKind kind = EmbedderKind::kPatchProjection;
  int grid = 8;
  int channels = 3;
  std::size_t dim = 64;
  std::uint64_t seed = 1234;        // projection seed when no weights file is given
  std::filesystem::path weights_path;     // optional projection weights
  std::filesystem::path embeddings_path;  // required for kPrecomputed
};

// Everything a personalize/recognize/evaluate run needs besides the data.
// Paths in a config file are resolved against the file's directory.
struct PipelineConfig {
  SamplerConfig sampler;
  EdgeFilterConfig edge_filter;
  EmbedderConfig embedder;
  std::optional<std::filesystem::path> adapter;  // empty means "none"
  std::size_t window_stride = 1;
  std::size_t threads = 1;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  // 16 hex digits of FNV-1a over the canonical (sorted-key) JSON dump.
  std::string digest() const;
};

PipelineConfig parse_pipeline_config(const nlohmann::json& doc,
                                     const std::filesystem::path& base_dir = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// Seed precedence: explicit flag, then PROTOPIPE_SEED, then the config value.
void apply_seed_override(PipelineConfig& cfg, std::optional<std::uint64_t> flag_seed);

// Loaded resources of a config: embedder and optional adapter weights.
struct PipelineResources {
  Embedder embedder;
  std::optional<TransformerWeights> adapter;
};

// Throws DimensionMismatch when the adapter and embedder dimensions differ.
PipelineResources load_resources(const PipelineConfig& cfg, const DatasetManifest* manifest);

LoaderConfig loader_config(const PipelineConfig& cfg);

PersonalizeResult run_personalize(const DatasetManifest& manifest, const std::string& user_id,
                                  const PipelineConfig& cfg, const PipelineResources& res);

nlohmann::json prototypes_to_json(const Prototypes& p);
Prototypes prototypes_from_json(const nlohmann::json& doc);
nlohmann::json predictions_to_json(const VideoPredictions& pred,
                                   const std::vector<std::string>& labels);

// One ablation arm per row of the component study. Arms are cumulative:
//   baseline  random sampler, no adapter, no filter
//   adapt     + adapter from the config (identical to baseline without one)
//   uniform   + uniform sampler
//   filter    + invalid-frame filter
enum class AblationArm { kBaseline, kAdapt, kUniform, kFilter };

std::string_view to_string(AblationArm arm);
AblationArm parse_arm(std::string_view name);
std::vector<AblationArm> parse_arms(std::string_view comma_list);

// Config used by an arm, derived from the base config.
PipelineConfig arm_config(const PipelineConfig& base, AblationArm arm);

struct UserAccuracy {
  std::string user_id;
  double accuracy = 0.0;
  std::size_t frames = 0;
};

struct ArmReport {
  AblationArm arm = AblationArm::kBaseline;
  std::string config_digest;
  double accuracy = 0.0;        // macro over users
  double micro_accuracy = 0.0;  // over all query frames
  std::size_t frames = 0;
  std::size_t clips_removed = 0;
  std::size_t overrides = 0;
  std::vector<UserAccuracy> per_user;
};

struct EvaluationReport {
  std::string config_digest;
  std::vector<ArmReport> arms;
};

// Personalizes and recognizes every user of the manifest once per arm.
EvaluationReport evaluate(const DatasetManifest& manifest, const PipelineConfig& base,
                          const std::vector<AblationArm>& arms);

nlohmann::json evaluation_to_json(const EvaluationReport& report);

}  // namespace protopipe
