#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace protopipe {

// Half-open frame range [start, start + length).
struct ClipIndex {
  std::size_t start = 0;
  std::size_t length = 0;

  bool operator==(const ClipIndex&) const = default;
};

enum class SamplingPolicy { kUniform, kRandom };

// Which candidate a uniform-sampler chunk contributes.
enum class ChunkPick { kSeededRandom, kFirst, kMiddle };

struct SamplerConfig {
  std::size_t clip_length = 8;
  std::size_t clips_per_video = 4;
  SamplingPolicy policy = SamplingPolicy::kUniform;
  ChunkPick within_chunk = ChunkPick::kMiddle;
  std::uint64_t seed = 0;
};

// Non-overlapping clips [0,L), [L,2L), ...; trailing frames that do not fill a
// whole clip are dropped.
std::vector<ClipIndex> enumerate_candidates(std::size_t num_frames, std::size_t clip_length);

// Splits the C candidates into K equal chunks of floor(C/K) (tail dropped)
// and picks one clip per chunk. Returns every candidate when C <= K.
// Throws InsufficientFrames when the video is shorter than one clip.
std::vector<ClipIndex> uniform_sample_clips(std::size_t num_frames, const SamplerConfig& cfg);

// K clip starts drawn independently and uniformly from [0, F - L], sorted.
std::vector<ClipIndex> random_sample_clips(std::size_t num_frames, const SamplerConfig& cfg);

// Dispatches on cfg.policy.
std::vector<ClipIndex> sample_clips(std::size_t num_frames, const SamplerConfig& cfg);

// One window per frame: window t holds frame indices [t-L+1, t], with indices
// below zero replaced by 0.
std::vector<std::vector<std::size_t>> causal_sliding_window(std::size_t num_frames,
                                                            std::size_t clip_length);

// Mixes a run-level seed with a string key (e.g. a video id) so that every
// video gets its own deterministic stream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key);

}  // namespace protopipe
