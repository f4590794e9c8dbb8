#pragma once

#include <cstdint>
#include <filesystem>

#include "protopipe/manifest.hpp"

namespace protopipe {

// kStandard: each object is a striped rectangle in its own hue. Clean videos
// show it filling most of the frame on a plain background; clutter videos
// add 1-3 distractor objects of the same user. A fraction of every clean
// video's frames (scattered) are blank.
//
// kAblation: a scenario in which each pipeline stage has something to fix.
//   * Objects are two-part: a top band in the object's own hue and a bottom
//     "view" band whose colour changes halfway through every video (view A
//     then view B, shared by all objects of a user). A sampler that misses a
//     half builds a prototype biased towards one view.
//   * Clean videos are shot against a light wall and clutter videos on a
//     table. The first object of every user has a blank middle third in each
//     clean video showing only the table, so an unfiltered prototype of that
//     object is pulled towards every clutter frame.
enum class Scenario { kStandard, kAblation };

struct SyntheticSpec {
  std::size_t num_users = 4;
  std::size_t objects_per_user = 3;
  // Number of clean and, separately, of clutter videos per object.
  std::size_t videos_per_object = 2;
  std::size_t frames_per_video = 32;
  int frame_size = 64;
  double blank_fraction = 0.25;
  std::uint64_t seed = 7;
  Scenario scenario = Scenario::kStandard;
};

struct SyntheticDataset {
  DatasetManifest manifest;
  BlankSidecar blank_frames;
};

// Writes <out>/manifest.json, <out>/blank_frames.json and one binary PPM per
// frame under <out>/frames/<video_id>/. Output is a pure function of `spec`.
SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec,
                                            const std::filesystem::path& out);

// Number of blank frames in a clean video of the standard scenario.
std::size_t blank_count(const SyntheticSpec& spec);

BlankSidecar load_blank_sidecar(const std::filesystem::path& path);

}  // namespace protopipe
