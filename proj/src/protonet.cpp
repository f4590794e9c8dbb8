#include "protopipe/protonet.hpp"

#include <algorithm>
#include <set>

#include "protopipe/error.hpp"

namespace protopipe {

Matrix compute_prototypes(const std::vector<std::vector<Vector>>& class_clips,
                          const std::vector<std::string>& labels) {
  if (class_clips.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, "one clip list per label is required");
  }
  std::vector<Vector> rows;
  rows.reserve(class_clips.size());
  for (std::size_t k = 0; k < class_clips.size(); ++k) {
    if (class_clips[k].empty()) {
      throw Error(ErrorCode::kEmptyClass, "class '" + labels[k] + "' has no clip embeddings");
    }
    rows.push_back(mean_rows(Matrix::from_rows(class_clips[k])));
  }
  return Matrix::from_rows(rows);
}

Classification classify_clip(std::span<const double> query, const Prototypes& protos,
                             bool use_adapted) {
  const Matrix& rows = use_adapted ? protos.adapted : protos.raw;
  if (query.size() != rows.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "query has dim " + std::to_string(query.size()) +
                                                   ", prototypes have dim " +
                                                   std::to_string(rows.cols()));
  }
  if (rows.rows() == 0) throw Error(ErrorCode::kEmptyInput, "no prototypes");
  Classification out;
  out.scores.reserve(rows.rows());
  for (std::size_t k = 0; k < rows.rows(); ++k) {
    out.scores.push_back(cosine_similarity(query, rows.row(k)));
    if (out.scores[k] > out.scores[out.index]) out.index = k;
  }
  return out;
}

Episode build_episode(const DatasetManifest& manifest, const std::string& user_id) {
  const UserRecord& user = manifest.user(user_id);
  Episode ep;
  ep.user_id = user.user_id;
  for (std::size_t k = 0; k < user.objects.size(); ++k) {
    const auto& object = user.objects[k];
    ep.labels.push_back(object.label);
    ep.support.emplace_back();
    for (const auto& v : object.videos) {
      if (v.kind == VideoKind::kClean) {
        ep.support.back().push_back(&v);
      } else {
        ep.query.emplace_back(&v, k);
      }
    }
    if (ep.support.back().empty()) {
      throw Error(ErrorCode::kInvariantViolation,
                  "object '" + object.label + "' has no clean video");
    }
  }
  return ep;
}

std::size_t embedder_dim(const Embedder& embedder) {
  if (const auto* p = std::get_if<PatchProjection>(&embedder)) return p->dim();
  return std::get<PrecomputedEmbeddings>(embedder).dim;
}

FeatureExtractor::FeatureExtractor(const DatasetManifest& manifest, Embedder embedder,
                                   EdgeFilterConfig edge, LoaderConfig loader)
    : manifest_(manifest), embedder_(std::move(embedder)), edge_(edge), loader_(loader) {
  edge_.enabled = true;
}

std::vector<Frame> FeatureExtractor::load(const VideoRecord& video) const {
  return load_frames_parallel(manifest_.frame_files(video), loader_);
}

const std::vector<Vector>& FeatureExtractor::embeddings(const VideoRecord& video) {
  auto it = embedding_cache_.find(video.video_id);
  if (it != embedding_cache_.end()) return it->second;

  std::vector<Vector> rows;
  if (const auto* projection = std::get_if<PatchProjection>(&embedder_)) {
    const auto frames = load(video);
    rows.reserve(frames.size());
    for (const auto& f : frames) rows.push_back(embed_frame(f, *projection));
  } else {
    const auto& table = std::get<PrecomputedEmbeddings>(embedder_).video(video.video_id);
    if (table.size() < video.frame_paths.size()) {
      throw Error(ErrorCode::kMissingFrameEmbedding,
                  "video '" + video.video_id + "' frame " + std::to_string(table.size()));
    }
    rows.assign(table.begin(), table.begin() + static_cast<std::ptrdiff_t>(video.frame_paths.size()));
  }
  return embedding_cache_.emplace(video.video_id, std::move(rows)).first->second;
}

const std::vector<bool>& FeatureExtractor::invalid_frames(const VideoRecord& video) {
  auto it = validity_cache_.find(video.video_id);
  if (it != validity_cache_.end()) return it->second;
  const auto frames = load(video);
  std::vector<bool> invalid;
  invalid.reserve(frames.size());
  for (const auto& f : frames) invalid.push_back(!is_frame_valid(f, edge_));
  return validity_cache_.emplace(video.video_id, std::move(invalid)).first->second;
}

namespace {

std::vector<std::size_t> clip_frames(const ClipIndex& clip) {
  std::vector<std::size_t> idx(clip.length);
  for (std::size_t i = 0; i < clip.length; ++i) idx[i] = clip.start + i;
  return idx;
}

}  // namespace

PersonalizeResult personalize(const Episode& episode, FeatureExtractor& features,
                              const PersonalizeOptions& options) {
  PersonalizeResult result;
  std::vector<std::vector<Vector>> class_clips(episode.labels.size());

  for (std::size_t k = 0; k < episode.labels.size(); ++k) {
    std::vector<ClipAudit> counted;
    std::vector<Vector> embedded;
    for (const VideoRecord* video : episode.support[k]) {
      SamplerConfig sampler = options.sampler;
      sampler.seed = derive_seed(options.sampler.seed, video->video_id);
      const auto clips = sample_clips(video->frame_paths.size(), sampler);
      const auto& rows = features.embeddings(*video);
      const std::vector<bool>* invalid =
          options.edge_filter.enabled ? &features.invalid_frames(*video) : nullptr;
      for (const auto& clip : clips) {
        const auto idx = clip_frames(clip);
        ClipAudit audit;
        audit.video_id = video->video_id;
        audit.clip_start = clip.start;
        audit.length = clip.length;
        if (invalid) {
          for (std::size_t t : idx) audit.invalid += (*invalid)[t] ? 1 : 0;
        }
        counted.push_back(std::move(audit));
        embedded.push_back(pool_frames(rows, idx));
      }
    }
    auto filtered = filter_by_counts(counted);
    for (std::size_t i : filtered.kept) class_clips[k].push_back(std::move(embedded[i]));
    result.audit.insert(result.audit.end(), filtered.audit.begin(), filtered.audit.end());
  }

  Prototypes& p = result.prototypes;
  p.labels = episode.labels;
  p.user_id = episode.user_id;
  p.config_digest = options.config_digest;
  p.raw = compute_prototypes(class_clips, episode.labels);
  p.adapted = options.adapter ? adapt_prototypes(p.raw, *options.adapter) : p.raw;
  return result;
}

VideoPredictions recognize_video(const VideoRecord& video, const Prototypes& protos,
                                 std::size_t clip_length, FeatureExtractor& features) {
  if (features.dim() != protos.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "embedder produces dim " + std::to_string(features.dim()) +
                    ", prototypes have dim " + std::to_string(protos.dim()));
  }
  if (video.frame_paths.empty()) throw Error(ErrorCode::kEmptyInput, "video has no frames");
  const auto& rows = features.embeddings(video);
  VideoPredictions out;
  out.video_id = video.video_id;
  const auto windows = causal_sliding_window(rows.size(), clip_length);
  out.per_frame.reserve(windows.size());
  for (const auto& w : windows) {
    auto c = classify_clip(pool_frames(rows, w), protos, true);
    out.per_frame.push_back({c.index, std::move(c.scores)});
  }
  return out;
}

double frame_accuracy(const std::vector<std::size_t>& predicted,
                      const std::vector<std::size_t>& truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(predicted.size()) +
                                                " predictions for " + std::to_string(truth.size()) +
                                                " ground-truth frames");
  }
  if (truth.empty()) throw Error(ErrorCode::kEmptyInput, "no frames to score");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

std::map<std::string, double> per_user_accuracy(const std::vector<UserResult>& results) {
  std::map<std::string, UserResult> merged;
  for (const auto& r : results) {
    auto& m = merged[r.user_id];
    m.predicted.insert(m.predicted.end(), r.predicted.begin(), r.predicted.end());
    m.truth.insert(m.truth.end(), r.truth.begin(), r.truth.end());
  }
  std::map<std::string, double> out;
  for (const auto& [user, m] : merged) out[user] = frame_accuracy(m.predicted, m.truth);
  return out;
}

}  // namespace protopipe
