#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace protopipe {

enum class VideoKind { kClean, kClutter };

struct VideoRecord {
  std::string video_id;
  VideoKind kind = VideoKind::kClean;
  // Relative to DatasetManifest::root; order is temporal order.
  std::vector<std::string> frame_paths;
};

struct ObjectRecord {
  std::string label;
  std::vector<VideoRecord> videos;
};

struct UserRecord {
  std::string user_id;
  std::vector<ObjectRecord> objects;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<UserRecord> users;

  const UserRecord& user(const std::string& user_id) const;
  // Returns the video and the label of the object it belongs to.
  std::pair<const VideoRecord*, std::string> find_video(const std::string& video_id) const;
  std::vector<std::filesystem::path> frame_files(const VideoRecord& video) const;
  std::size_t total_frames() const;
};

// Blank-frame ground truth, keyed by video id.
using BlankSidecar = std::map<std::string, std::vector<std::size_t>>;

std::string_view to_string(VideoKind kind);

// Parses and validates a manifest document. Schema errors carry a
// JSON-pointer location, e.g. "/users/0/objects/1/videos/0/kind".
DatasetManifest parse_manifest(const nlohmann::json& doc, std::filesystem::path root);
DatasetManifest load_manifest(const std::filesystem::path& path);

nlohmann::json manifest_to_json(const DatasetManifest& manifest);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Checks the structural invariants: unique user ids, unique labels per user,
// at least two objects per user, and one clean plus one clutter video per object.
void validate_manifest(const DatasetManifest& manifest);

}  // namespace protopipe
