#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "protopipe/frame.hpp"
#include "protopipe/manifest.hpp"
#include "protopipe/numerics.hpp"

namespace protopipe {

// Linear frame embedder: box-average downsample to grid x grid per channel,
// scale samples to [0,1], flatten channel-major, multiply by `projection`.
struct PatchProjection {
  int grid = 8;
  int channels = 3;
  Matrix projection;  // (grid * grid * channels) x dim

  std::size_t input_dim() const { return static_cast<std::size_t>(grid) * grid * channels; }
  std::size_t dim() const { return projection.cols(); }
};

// Seeded Gaussian matrix with orthonormal columns (modified Gram-Schmidt).
// Requires 2 <= dim <= grid * grid * channels.
PatchProjection make_patch_projection(int grid, int channels, std::size_t dim, std::uint64_t seed);

PatchProjection load_patch_projection(const std::filesystem::path& path);
nlohmann::json patch_projection_to_json(const PatchProjection& p);

// Downsampled, normalized, flattened input of the projection.
Vector downsample_features(const Frame& frame, int grid);

Vector embed_frame(const Frame& frame, const PatchProjection& spec);

struct ClipEmbedding {
  Vector vector;
  std::string video_id;
  std::size_t clip_start = 0;
};

// Mean of the per-frame embeddings. Throws EmptyClip for an empty list.
Vector embed_clip(const std::vector<Frame>& frames, const PatchProjection& spec);

// Mean of rows `indices` of a per-frame embedding table.
Vector pool_frames(const std::vector<Vector>& frame_embeddings,
                   const std::vector<std::size_t>& indices);

// Externally computed per-frame features, keyed by video id.
struct PrecomputedEmbeddings {
  std::size_t dim = 0;
  std::map<std::string, std::vector<Vector>> videos;

  const std::vector<Vector>& video(const std::string& video_id) const;
};

// When `expected` is given, every frame of every manifest video must have a
// row; a gap is reported as MissingFrameEmbedding naming the video and index.
PrecomputedEmbeddings parse_precomputed(const nlohmann::json& doc,
                                        const DatasetManifest* expected = nullptr);
PrecomputedEmbeddings load_precomputed(const std::filesystem::path& path,
                                       const DatasetManifest* expected = nullptr);

}  // namespace protopipe
