#include "protopipe/pipeline.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <type_traits>

#include "protopipe/error.hpp"

namespace protopipe {

using nlohmann::json;

namespace {

std::string_view policy_name(SamplingPolicy p) {
  return p == SamplingPolicy::kUniform ? "uniform" : "random";
}

std::string_view pick_name(ChunkPick p) {
  switch (p) {
    case ChunkPick::kSeededRandom: return "seeded_random";
    case ChunkPick::kFirst: return "first";
    case ChunkPick::kMiddle: return "middle";
  }
  return "middle";
}

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::kSchemaViolation, "config " + where + ": " + what);
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) config_error(where, "unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    if (!it->is_number_integer() || it->template get<long long>() < 0) {
      config_error(where + "/" + key, "expected a non-negative integer");
    }
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    config_error(where + "/" + key, "wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

json PipelineConfig::to_json() const {
  json embedder_json = {{"kind", embedder.kind == EmbedderKind::kPatchProjection ? "patch_projection"
                                                                                 : "precomputed"},
                        {"grid", embedder.grid},
                        {"channels", embedder.channels},
                        {"dim", embedder.dim},
                        {"seed", embedder.seed}};
  if (!embedder.weights_path.empty()) embedder_json["weights_path"] = embedder.weights_path.string();
  if (!embedder.embeddings_path.empty()) {
    embedder_json["embeddings_path"] = embedder.embeddings_path.string();
  }
  return {{"seed", seed},
          {"threads", threads},
          {"window_stride", window_stride},
          {"sampler",
           {{"clip_length", sampler.clip_length},
            {"clips_per_video", sampler.clips_per_video},
            {"policy", policy_name(sampler.policy)},
            {"within_chunk", pick_name(sampler.within_chunk)}}},
          {"edge_filter",
           {{"enabled", edge_filter.enabled},
            {"tau_mag", edge_filter.tau_mag},
            {"tau_density", edge_filter.tau_density}}},
          {"embedder", embedder_json},
          {"adapter", adapter ? adapter->string() : std::string("none")}};
}

std::string PipelineConfig::digest() const {
  const std::string canonical = to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

PipelineConfig parse_pipeline_config(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) config_error("/", "expected object");
  reject_unknown(doc, {"seed", "threads", "window_stride", "sampler", "edge_filter", "embedder", "adapter"},
                 "/");
  PipelineConfig cfg;
  cfg.seed = get_or<std::uint64_t>(doc, "seed", cfg.seed, "");
  cfg.threads = get_or<std::size_t>(doc, "threads", cfg.threads, "");
  cfg.window_stride = get_or<std::size_t>(doc, "window_stride", cfg.window_stride, "");
  if (cfg.threads < 1) config_error("/threads", "must be >= 1");
  if (cfg.window_stride != 1) {
    config_error("/window_stride", "only stride 1 is supported (one window per frame)");
  }

  if (doc.contains("sampler")) {
    const json& s = doc["sampler"];
    if (!s.is_object()) config_error("/sampler", "expected object");
    reject_unknown(s, {"clip_length", "clips_per_video", "policy", "within_chunk"}, "/sampler");
    cfg.sampler.clip_length = get_or<std::size_t>(s, "clip_length", cfg.sampler.clip_length, "/sampler");
    cfg.sampler.clips_per_video =
        get_or<std::size_t>(s, "clips_per_video", cfg.sampler.clips_per_video, "/sampler");
    if (cfg.sampler.clip_length < 1) config_error("/sampler/clip_length", "must be >= 1");
    if (cfg.sampler.clips_per_video < 1) config_error("/sampler/clips_per_video", "must be >= 1");
    const auto policy = get_or<std::string>(s, "policy", "uniform", "/sampler");
    if (policy == "uniform") {
      cfg.sampler.policy = SamplingPolicy::kUniform;
    } else if (policy == "random") {
      cfg.sampler.policy = SamplingPolicy::kRandom;
    } else {
      config_error("/sampler/policy", "expected \"uniform\" or \"random\"");
    }
    const auto pick = get_or<std::string>(s, "within_chunk", "middle", "/sampler");
    if (pick == "middle") {
      cfg.sampler.within_chunk = ChunkPick::kMiddle;
    } else if (pick == "first") {
      cfg.sampler.within_chunk = ChunkPick::kFirst;
    } else if (pick == "seeded_random") {
      cfg.sampler.within_chunk = ChunkPick::kSeededRandom;
    } else {
      config_error("/sampler/within_chunk", "expected \"middle\", \"first\" or \"seeded_random\"");
    }
  }

  if (doc.contains("edge_filter")) {
    const json& e = doc["edge_filter"];
    if (!e.is_object()) config_error("/edge_filter", "expected object");
    reject_unknown(e, {"enabled", "tau_mag", "tau_density"}, "/edge_filter");
    cfg.edge_filter.enabled = get_or<bool>(e, "enabled", cfg.edge_filter.enabled, "/edge_filter");
    cfg.edge_filter.tau_mag = get_or<double>(e, "tau_mag", cfg.edge_filter.tau_mag, "/edge_filter");
    cfg.edge_filter.tau_density =
        get_or<double>(e, "tau_density", cfg.edge_filter.tau_density, "/edge_filter");
    if (cfg.edge_filter.tau_mag < 0) config_error("/edge_filter/tau_mag", "must be >= 0");
    if (cfg.edge_filter.tau_density < 0 || cfg.edge_filter.tau_density > 1) {
      config_error("/edge_filter/tau_density", "must lie in [0, 1]");
    }
  }

  if (doc.contains("embedder")) {
    const json& m = doc["embedder"];
    if (!m.is_object()) config_error("/embedder", "expected object");
    reject_unknown(m, {"kind", "grid", "channels", "dim", "seed", "weights_path", "embeddings_path"},
                   "/embedder");
    const auto kind = get_or<std::string>(m, "kind", "patch_projection", "/embedder");
    if (kind == "patch_projection") {
      cfg.embedder.kind = EmbedderKind::kPatchProjection;
    } else if (kind == "precomputed") {
      cfg.embedder.kind = EmbedderKind::kPrecomputed;
    } else {
      config_error("/embedder/kind", "expected \"patch_projection\" or \"precomputed\"");
    }
    cfg.embedder.grid = get_or<int>(m, "grid", cfg.embedder.grid, "/embedder");
    cfg.embedder.channels = get_or<int>(m, "channels", cfg.embedder.channels, "/embedder");
    cfg.embedder.dim = get_or<std::size_t>(m, "dim", cfg.embedder.dim, "/embedder");
    cfg.embedder.seed = get_or<std::uint64_t>(m, "seed", cfg.embedder.seed, "/embedder");
    if (m.contains("weights_path")) {
      cfg.embedder.weights_path =
          resolve(base_dir, get_or<std::string>(m, "weights_path", "", "/embedder"));
    }
    if (m.contains("embeddings_path")) {
      cfg.embedder.embeddings_path =
          resolve(base_dir, get_or<std::string>(m, "embeddings_path", "", "/embedder"));
    }
    if (cfg.embedder.kind == EmbedderKind::kPrecomputed && cfg.embedder.embeddings_path.empty()) {
      config_error("/embedder/embeddings_path", "required for precomputed embeddings");
    }
  }

  if (doc.contains("adapter")) {
    const auto a = get_or<std::string>(doc, "adapter", "none", "");
    if (a != "none") cfg.adapter = resolve(base_dir, a);
  }
  cfg.sampler.seed = cfg.seed;
  return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  return parse_pipeline_config(doc, path.parent_path());
}

void apply_seed_override(PipelineConfig& cfg, std::optional<std::uint64_t> flag_seed) {
  if (flag_seed) {
    cfg.seed = *flag_seed;
  } else if (const char* env = std::getenv("PROTOPIPE_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0') {
      throw Error(ErrorCode::kInvalidArgument, std::string("PROTOPIPE_SEED is not an integer: ") + env);
    }
    cfg.seed = v;
  }
  cfg.sampler.seed = cfg.seed;
}

PipelineResources load_resources(const PipelineConfig& cfg, const DatasetManifest* manifest) {
  PipelineResources res{PatchProjection{}, std::nullopt};
  if (cfg.embedder.kind == EmbedderKind::kPrecomputed) {
    res.embedder = load_precomputed(cfg.embedder.embeddings_path, manifest);
  } else if (!cfg.embedder.weights_path.empty()) {
    res.embedder = load_patch_projection(cfg.embedder.weights_path);
  } else {
    res.embedder = make_patch_projection(cfg.embedder.grid, cfg.embedder.channels,
                                         cfg.embedder.dim, cfg.embedder.seed);
  }
  if (cfg.adapter) {
    res.adapter = load_transformer_weights(*cfg.adapter);
    if (res.adapter->d != embedder_dim(res.embedder)) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "adapter expects dim " + std::to_string(res.adapter->d) + ", embedder produces " +
                      std::to_string(embedder_dim(res.embedder)));
    }
  }
  return res;
}

LoaderConfig loader_config(const PipelineConfig& cfg) {
  LoaderConfig lc;
  lc.num_threads = cfg.threads;
  return lc;
}

PersonalizeResult run_personalize(const DatasetManifest& manifest, const std::string& user_id,
                                  const PipelineConfig& cfg, const PipelineResources& res) {
  const Episode episode = build_episode(manifest, user_id);
  FeatureExtractor features(manifest, res.embedder, cfg.edge_filter, loader_config(cfg));
  PersonalizeOptions options;
  options.sampler = cfg.sampler;
  options.edge_filter = cfg.edge_filter;
  options.adapter = res.adapter ? &*res.adapter : nullptr;
  options.config_digest = cfg.digest();
  return personalize(episode, features, options);
}

namespace {

json matrix_rows(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(m.row_vector(r));
  return rows;
}

Matrix rows_matrix(const json& j, const char* field) {
  std::vector<Vector> rows;
  try {
    rows = j.get<std::vector<Vector>>();
    return Matrix::from_rows(rows);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kParseError, std::string("prototypes field '") + field + "' is malformed");
  }
}

}  // namespace

json prototypes_to_json(const Prototypes& p) {
  return {{"user_id", p.user_id},
          {"labels", p.labels},
          {"dim", p.dim()},
          {"raw", matrix_rows(p.raw)},
          {"adapted", matrix_rows(p.adapted)},
          {"config_digest", p.config_digest}};
}

Prototypes prototypes_from_json(const json& doc) {
  Prototypes p;
  try {
    p.user_id = doc.at("user_id").get<std::string>();
    p.labels = doc.at("labels").get<std::vector<std::string>>();
    p.config_digest = doc.at("config_digest").get<std::string>();
    const auto dim = doc.at("dim").get<std::size_t>();
    p.raw = rows_matrix(doc.at("raw"), "raw");
    p.adapted = rows_matrix(doc.at("adapted"), "adapted");
    if (p.raw.cols() != dim || p.adapted.cols() != dim) {
      throw Error(ErrorCode::kInconsistentDim, "prototype rows disagree with dim");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  if (p.labels.size() < 2 || p.raw.rows() != p.labels.size() || p.adapted.rows() != p.labels.size()) {
    throw Error(ErrorCode::kInvariantViolation, "prototype rows must match labels (N >= 2)");
  }
  return p;
}

json predictions_to_json(const VideoPredictions& pred, const std::vector<std::string>& labels) {
  json frames = json::array();
  for (const auto& f : pred.per_frame) {
    frames.push_back({{"pred", labels.at(f.index)}, {"scores", f.scores}});
  }
  return {{"video_id", pred.video_id}, {"labels", labels}, {"per_frame", std::move(frames)}};
}

std::string_view to_string(AblationArm arm) {
  switch (arm) {
    case AblationArm::kBaseline: return "baseline";
    case AblationArm::kAdapt: return "adapt";
    case AblationArm::kUniform: return "uniform";
    case AblationArm::kFilter: return "filter";
  }
  return "baseline";
}

AblationArm parse_arm(std::string_view name) {
  for (auto arm : {AblationArm::kBaseline, AblationArm::kAdapt, AblationArm::kUniform,
                   AblationArm::kFilter}) {
    if (to_string(arm) == name) return arm;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown ablation arm '" + std::string(name) + "'");
}

std::vector<AblationArm> parse_arms(std::string_view comma_list) {
  std::vector<AblationArm> arms;
  std::size_t pos = 0;
  while (pos <= comma_list.size()) {
    const auto next = comma_list.find(',', pos);
    const auto token = comma_list.substr(pos, next == std::string_view::npos ? next : next - pos);
    if (!token.empty()) arms.push_back(parse_arm(token));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  if (arms.empty()) throw Error(ErrorCode::kInvalidArgument, "no ablation arms given");
  return arms;
}

PipelineConfig arm_config(const PipelineConfig& base, AblationArm arm) {
  PipelineConfig cfg = base;
  const int level = static_cast<int>(arm);
  if (level < static_cast<int>(AblationArm::kAdapt)) cfg.adapter.reset();
  cfg.sampler.policy =
      level >= static_cast<int>(AblationArm::kUniform) ? SamplingPolicy::kUniform : SamplingPolicy::kRandom;
  cfg.edge_filter.enabled = level >= static_cast<int>(AblationArm::kFilter);
  return cfg;
}

EvaluationReport evaluate(const DatasetManifest& manifest, const PipelineConfig& base,
                          const std::vector<AblationArm>& arms) {
  EvaluationReport report;
  report.config_digest = base.digest();
  const PipelineResources resources = load_resources(base, &manifest);
  FeatureExtractor features(manifest, resources.embedder, base.edge_filter, loader_config(base));

  for (AblationArm arm : arms) {
    const PipelineConfig cfg = arm_config(base, arm);
    ArmReport row;
    row.arm = arm;
    row.config_digest = cfg.digest();
    PersonalizeOptions options;
    options.sampler = cfg.sampler;
    options.edge_filter = cfg.edge_filter;
    options.adapter = cfg.adapter && resources.adapter ? &*resources.adapter : nullptr;
    options.config_digest = row.config_digest;

    std::size_t correct_total = 0;
    double macro = 0.0;
    for (const auto& user : manifest.users) {
      const Episode episode = build_episode(manifest, user.user_id);
      const auto personalized = personalize(episode, features, options);
      for (const auto& a : personalized.audit) {
        row.clips_removed += a.removed ? 1 : 0;
        row.overrides += a.override_kept ? 1 : 0;
      }
      UserResult ur;
      ur.user_id = user.user_id;
      for (const auto& [video, label] : episode.query) {
        const auto pred =
            recognize_video(*video, personalized.prototypes, cfg.sampler.clip_length, features);
        for (const auto& f : pred.per_frame) {
          ur.predicted.push_back(f.index);
          ur.truth.push_back(label);
        }
      }
      const double acc = frame_accuracy(ur.predicted, ur.truth);
      row.per_user.push_back({user.user_id, acc, ur.truth.size()});
      macro += acc;
      row.frames += ur.truth.size();
      for (std::size_t i = 0; i < ur.truth.size(); ++i) correct_total += ur.predicted[i] == ur.truth[i];
    }
    row.accuracy = macro / static_cast<double>(manifest.users.size());
    row.micro_accuracy = static_cast<double>(correct_total) / static_cast<double>(row.frames);
    report.arms.push_back(std::move(row));
  }
  return report;
}

json evaluation_to_json(const EvaluationReport& report) {
  json arms = json::array();
  json margins = json::array();
  for (std::size_t i = 0; i < report.arms.size(); ++i) {
    const auto& a = report.arms[i];
    json users = json::array();
    for (const auto& u : a.per_user) {
      users.push_back({{"user_id", u.user_id}, {"accuracy", u.accuracy}, {"frames", u.frames}});
    }
    arms.push_back({{"arm", to_string(a.arm)},
                    {"config_digest", a.config_digest},
                    {"accuracy", a.accuracy},
                    {"micro_accuracy", a.micro_accuracy},
                    {"frames", a.frames},
                    {"clips_removed", a.clips_removed},
                    {"overrides", a.overrides},
                    {"per_user", std::move(users)}});
    if (i > 0) {
      margins.push_back({{"from", to_string(report.arms[i - 1].arm)},
                         {"to", to_string(a.arm)},
                         {"delta", a.accuracy - report.arms[i - 1].accuracy}});
    }
  }
  return {{"config_digest", report.config_digest}, {"arms", std::move(arms)}, {"margins", std::move(margins)}};
}

}  // namespace protopipe
