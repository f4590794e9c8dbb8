#include "protopipe/frame_validity.hpp"

#include <algorithm>
#include <cmath>

#include "protopipe/error.hpp"

namespace protopipe {

Frame to_grayscale(const Frame& frame) {
  if (frame.channels == 1) return frame;
  if (frame.channels != 3) {
    throw Error(ErrorCode::kUnsupportedChannels, std::to_string(frame.channels) + " channels");
  }
  Frame gray(frame.width, frame.height, 1);
  const std::size_t n = static_cast<std::size_t>(frame.width) * frame.height;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = 0.299 * frame.pixels[3 * i] + 0.587 * frame.pixels[3 * i + 1] +
                     0.114 * frame.pixels[3 * i + 2];
    gray.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
  }
  return gray;
}

GradientMagnitude sobel_magnitude(const Frame& gray) {
  if (gray.channels != 1) {
    throw Error(ErrorCode::kUnsupportedChannels, "sobel expects a single-channel frame");
  }
  if (gray.width < 3 || gray.height < 3) {
    throw Error(ErrorCode::kFrameTooSmall, std::to_string(gray.width) + "x" +
                                               std::to_string(gray.height) +
                                               " has no interior pixels");
  }
  GradientMagnitude out;
  out.width = gray.width - 2;
  out.height = gray.height - 2;
  out.values.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int y = 1; y < gray.height - 1; ++y) {
    for (int x = 1; x < gray.width - 1; ++x) {
      auto p = [&](int dx, int dy) { return static_cast<int>(gray.at(x + dx, y + dy)); };
      const int gx = (p(1, -1) - p(-1, -1)) + 2 * (p(1, 0) - p(-1, 0)) + (p(1, 1) - p(-1, 1));
      const int gy = (p(-1, 1) - p(-1, -1)) + 2 * (p(0, 1) - p(0, -1)) + (p(1, 1) - p(1, -1));
      out.values[static_cast<std::size_t>(y - 1) * out.width + (x - 1)] =
          std::sqrt(static_cast<double>(gx * gx + gy * gy));
    }
  }
  return out;
}

double edge_density(const Frame& gray, double tau_mag) {
  const auto mag = sobel_magnitude(gray);
  const auto above =
      std::count_if(mag.values.begin(), mag.values.end(), [&](double m) { return m > tau_mag; });
  return static_cast<double>(above) / static_cast<double>(mag.values.size());
}

bool is_frame_valid(const Frame& frame, const EdgeFilterConfig& cfg) {
  if (!cfg.enabled) return true;
  return edge_density(to_grayscale(frame), cfg.tau_mag) >= cfg.tau_density;
}

FilterResult filter_by_counts(const std::vector<ClipAudit>& counted) {
  FilterResult result;
  result.audit = counted;
  for (std::size_t i = 0; i < counted.size(); ++i) {
    auto& a = result.audit[i];
    // Strictly more than half: invalid > L/2  <=>  2*invalid > L.
    a.removed = 2 * a.invalid > a.length;
    a.override_kept = false;
    if (!a.removed) result.kept.push_back(i);
  }
  if (result.kept.empty() && !counted.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < counted.size(); ++i) {
      const auto& c = counted[i];
      const auto& b = counted[best];
      if (c.invalid < b.invalid || (c.invalid == b.invalid && c.clip_start < b.clip_start)) {
        best = i;
      }
    }
    result.audit[best].removed = false;
    result.audit[best].override_kept = true;
    result.kept.push_back(best);
  }
  return result;
}

FilterResult filter_clips(const std::vector<CandidateClip>& clips, const EdgeFilterConfig& cfg) {
  std::vector<ClipAudit> counted;
  counted.reserve(clips.size());
  for (const auto& c : clips) {
    ClipAudit a;
    a.video_id = c.video_id;
    a.clip_start = c.clip.start;
    a.length = c.frames.size();
    a.invalid = static_cast<std::size_t>(std::count_if(
        c.frames.begin(), c.frames.end(), [&](const Frame& f) { return !is_frame_valid(f, cfg); }));
    counted.push_back(std::move(a));
  }
  return filter_by_counts(counted);
}

nlohmann::json audit_to_json(const ClipAudit& entry) {
  return {{"video_id", entry.video_id}, {"clip_start", entry.clip_start},
          {"invalid", entry.invalid},   {"L", entry.length},
          {"removed", entry.removed},   {"override", entry.override_kept}};
}

}  // namespace protopipe
