#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "protopipe/clip_sampling.hpp"
#include "protopipe/frame.hpp"

namespace protopipe {

struct EdgeFilterConfig {
  double tau_mag = 32.0;       // Sobel magnitude threshold, 0..1020*sqrt(2)
  double tau_density = 0.01;   // minimum fraction of interior pixels above tau_mag
  bool enabled = true;
};

// Sobel magnitudes over the interior of a frame. Entry (x, y) corresponds to
// source pixel (x + 1, y + 1); border pixels have no entry.
struct GradientMagnitude {
  int width = 0;   // source width - 2
  int height = 0;  // source height - 2
  std::vector<double> values;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

// BT.601 luma, rounded and clamped. Gray frames pass through unchanged.
Frame to_grayscale(const Frame& frame);

GradientMagnitude sobel_magnitude(const Frame& gray);

// Fraction of interior pixels whose magnitude is strictly above tau_mag.
double edge_density(const Frame& gray, double tau_mag);

bool is_frame_valid(const Frame& frame, const EdgeFilterConfig& cfg);

struct CandidateClip {
  std::string video_id;
  ClipIndex clip;
  std::vector<Frame> frames;
};

struct ClipAudit {
  std::string video_id;
  std::size_t clip_start = 0;
  std::size_t invalid = 0;
  std::size_t length = 0;
  bool removed = false;
  bool override_kept = false;
};

struct FilterResult {
  std::vector<std::size_t> kept;  // indices into the input, ascending
  std::vector<ClipAudit> audit;   // one entry per input clip, input order
};

// Removes clips where strictly more than half of the frames are invalid.
// If that would remove every clip, the clip with the fewest invalid frames
// (earliest start, then input order, on ties) is kept and flagged as an override.
FilterResult filter_clips(const std::vector<CandidateClip>& clips, const EdgeFilterConfig& cfg);

// Same rule, for callers that already know the per-clip invalid counts.
FilterResult filter_by_counts(const std::vector<ClipAudit>& counted);

nlohmann::json audit_to_json(const ClipAudit& entry);

}  // namespace protopipe
