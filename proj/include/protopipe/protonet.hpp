#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "protopipe/adaptation.hpp"
#include "protopipe/clip_sampling.hpp"
#include "protopipe/embedding.hpp"
#include "protopipe/frame_validity.hpp"
#include "protopipe/loader.hpp"
#include "protopipe/manifest.hpp"
#include "protopipe/numerics.hpp"

namespace protopipe {

struct Prototypes {
  std::vector<std::string> labels;
  Matrix raw;      // N x d, row i belongs to labels[i]
  Matrix adapted;  // N x d, equal to raw when no adapter is used
  std::string user_id;
  std::string config_digest;

  std::size_t dim() const { return raw.cols(); }
};

// Row k is the mean of class k's clip vectors. Throws EmptyClass naming the
// first class without clips.
Matrix compute_prototypes(const std::vector<std::vector<Vector>>& class_clips,
                          const std::vector<std::string>& labels);

struct Classification {
  std::size_t index = 0;
  Vector scores;  // cosine similarity to every prototype row
};

// Cosine nearest prototype; ties go to the lowest class index.
Classification classify_clip(std::span<const double> query, const Prototypes& protos,
                             bool use_adapted = true);

// One user's support/query split: clean videos per class, clutter videos
// with the class they show.
struct Episode {
  std::string user_id;
  std::vector<std::string> labels;
  std::vector<std::vector<const VideoRecord*>> support;
  std::vector<std::pair<const VideoRecord*, std::size_t>> query;
};

Episode build_episode(const DatasetManifest& manifest, const std::string& user_id);

using Embedder = std::variant<PatchProjection, PrecomputedEmbeddings>;

std::size_t embedder_dim(const Embedder& embedder);

// Per-video frame embeddings and validity flags, computed once and cached.
// Frames are read with the configured parallel loader.
class FeatureExtractor {
 public:
  FeatureExtractor(const DatasetManifest& manifest, Embedder embedder, EdgeFilterConfig edge,
                   LoaderConfig loader);

  const std::vector<Vector>& embeddings(const VideoRecord& video);
  // invalid[t] is true when frame t fails the edge test (thresholds from the
  // constructor's config, regardless of its `enabled` flag).
  const std::vector<bool>& invalid_frames(const VideoRecord& video);

  std::size_t dim() const { return embedder_dim(embedder_); }
  const EdgeFilterConfig& edge_config() const { return edge_; }

 private:
  std::vector<Frame> load(const VideoRecord& video) const;

  const DatasetManifest& manifest_;
  Embedder embedder_;
  EdgeFilterConfig edge_;
  LoaderConfig loader_;
  std::map<std::string, std::vector<Vector>> embedding_cache_;
  std::map<std::string, std::vector<bool>> validity_cache_;
};

struct PersonalizeOptions {
  SamplerConfig sampler;
  EdgeFilterConfig edge_filter;
  const TransformerWeights* adapter = nullptr;  // nullptr: adapted == raw
  std::string config_digest;
};

struct PersonalizeResult {
  Prototypes prototypes;
  std::vector<ClipAudit> audit;  // every sampled support clip, class by class
};

// Samples clips from each clean video (per-video seed derived from
// sampler.seed and the video id), drops mostly-invalid clips per class,
// averages clip embeddings into prototypes and optionally adapts them.
PersonalizeResult personalize(const Episode& episode, FeatureExtractor& features,
                              const PersonalizeOptions& options);

struct FramePrediction {
  std::size_t index = 0;
  Vector scores;
};

struct VideoPredictions {
  std::string video_id;
  std::vector<FramePrediction> per_frame;
};

// One causal window per frame, pooled and classified against the adapted
// prototypes. Throws DimensionMismatch when the embedder and the prototypes
// disagree on dimension.
VideoPredictions recognize_video(const VideoRecord& video, const Prototypes& protos,
                                 std::size_t clip_length, FeatureExtractor& features);

double frame_accuracy(const std::vector<std::size_t>& predicted,
                      const std::vector<std::size_t>& truth);

struct UserResult {
  std::string user_id;
  std::vector<std::size_t> predicted;  // every query frame of the user
  std::vector<std::size_t> truth;
};

// Micro-average over each user's frames (videos are not averaged separately).
std::map<std::string, double> per_user_accuracy(const std::vector<UserResult>& results);

}  // namespace protopipe
