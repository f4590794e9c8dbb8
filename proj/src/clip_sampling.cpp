#include "protopipe/clip_sampling.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "protopipe/error.hpp"

namespace protopipe {
namespace {

void check_lengths(const SamplerConfig& cfg) {
  if (cfg.clip_length < 1) throw Error(ErrorCode::kInvalidArgument, "clip_length must be >= 1");
  if (cfg.clips_per_video < 1) {
    throw Error(ErrorCode::kInvalidArgument, "clips_per_video must be >= 1");
  }
}

bool by_start(const ClipIndex& a, const ClipIndex& b) { return a.start < b.start; }

}  // namespace

std::vector<ClipIndex> enumerate_candidates(std::size_t num_frames, std::size_t clip_length) {
  if (clip_length < 1) throw Error(ErrorCode::kInvalidArgument, "clip_length must be >= 1");
  std::vector<ClipIndex> out;
  const std::size_t count = num_frames / clip_length;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back({i * clip_length, clip_length});
  return out;
}

std::vector<ClipIndex> uniform_sample_clips(std::size_t num_frames, const SamplerConfig& cfg) {
  check_lengths(cfg);
  auto candidates = enumerate_candidates(num_frames, cfg.clip_length);
  if (candidates.empty()) {
    throw Error(ErrorCode::kInsufficientFrames,
                std::to_string(num_frames) + " frames cannot hold one clip of " +
                    std::to_string(cfg.clip_length));
  }
  const std::size_t k = cfg.clips_per_video;
  if (candidates.size() <= k) return candidates;

  const std::size_t per_chunk = candidates.size() / k;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> offset_dist(0, per_chunk - 1);

  std::vector<ClipIndex> out;
  out.reserve(k);
  for (std::size_t chunk = 0; chunk < k; ++chunk) {
    std::size_t offset = 0;
    switch (cfg.within_chunk) {
      case ChunkPick::kFirst: offset = 0; break;
      case ChunkPick::kMiddle: offset = per_chunk / 2; break;
      case ChunkPick::kSeededRandom: offset = offset_dist(rng); break;
    }
    out.push_back(candidates[chunk * per_chunk + offset]);
  }
  return out;
}

std::vector<ClipIndex> random_sample_clips(std::size_t num_frames, const SamplerConfig& cfg) {
  check_lengths(cfg);
  if (num_frames < cfg.clip_length) {
    throw Error(ErrorCode::kInsufficientFrames,
                std::to_string(num_frames) + " frames cannot hold one clip of " +
                    std::to_string(cfg.clip_length));
  }
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> start_dist(0, num_frames - cfg.clip_length);
  std::vector<ClipIndex> out;
  out.reserve(cfg.clips_per_video);
  for (std::size_t i = 0; i < cfg.clips_per_video; ++i) {
    out.push_back({start_dist(rng), cfg.clip_length});
  }
  std::stable_sort(out.begin(), out.end(), by_start);
  return out;
}

std::vector<ClipIndex> sample_clips(std::size_t num_frames, const SamplerConfig& cfg) {
  return cfg.policy == SamplingPolicy::kUniform ? uniform_sample_clips(num_frames, cfg)
                                                : random_sample_clips(num_frames, cfg);
}

std::vector<std::vector<std::size_t>> causal_sliding_window(std::size_t num_frames,
                                                            std::size_t clip_length) {
  if (clip_length < 1) throw Error(ErrorCode::kInvalidArgument, "clip_length must be >= 1");
  std::vector<std::vector<std::size_t>> windows(num_frames);
  for (std::size_t t = 0; t < num_frames; ++t) {
    auto& w = windows[t];
    w.reserve(clip_length);
    for (std::size_t j = 0; j < clip_length; ++j) {
      // Frame index t - (L - 1) + j, clamped at 0.
      const std::size_t back = clip_length - 1 - j;
      w.push_back(t >= back ? t - back : 0);
    }
  }
  return windows;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) {
  // FNV-1a over the key, then a splitmix64 finalizer over the combination.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = seed ^ (h + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace protopipe
