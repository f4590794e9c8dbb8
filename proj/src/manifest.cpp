#include "protopipe/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "protopipe/error.hpp"

namespace protopipe {

using nlohmann::json;

std::string_view to_string(VideoKind kind) {
  return kind == VideoKind::kClean ? "clean" : "clutter";
}

const UserRecord& DatasetManifest::user(const std::string& user_id) const {
  for (const auto& u : users) {
    if (u.user_id == user_id) return u;
  }
  throw Error(ErrorCode::kUnknownUser, "no user '" + user_id + "' in dataset");
}

std::pair<const VideoRecord*, std::string> DatasetManifest::find_video(
    const std::string& video_id) const {
  for (const auto& u : users)
    for (const auto& o : u.objects)
      for (const auto& v : o.videos)
        if (v.video_id == video_id) return {&v, o.label};
  throw Error(ErrorCode::kUnknownVideo, "no video '" + video_id + "' in dataset");
}

std::vector<std::filesystem::path> DatasetManifest::frame_files(const VideoRecord& video) const {
  std::vector<std::filesystem::path> out;
  out.reserve(video.frame_paths.size());
  for (const auto& p : video.frame_paths) out.push_back(root / p);
  return out;
}

std::size_t DatasetManifest::total_frames() const {
  std::size_t n = 0;
  for (const auto& u : users)
    for (const auto& o : u.objects)
      for (const auto& v : o.videos) n += v.frame_paths.size();
  return n;
}

namespace {

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::kSchemaViolation, (where.empty() ? "/" : where) + ": " + what);
}

const json& member(const json& obj, const std::string& key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(where, "missing key '" + key + "'");
  return *it;
}

std::string string_member(const json& obj, const std::string& key, const std::string& where) {
  const json& v = member(obj, key, where);
  if (!v.is_string()) schema_error(where + "/" + key, "expected string");
  return v.get<std::string>();
}

const json& array_member(const json& obj, const std::string& key, const std::string& where) {
  const json& v = member(obj, key, where);
  if (!v.is_array()) schema_error(where + "/" + key, "expected array");
  return v;
}

void require_object(const json& v, const std::string& where) {
  if (!v.is_object()) schema_error(where, "expected object");
}

}  // namespace

DatasetManifest parse_manifest(const json& doc, std::filesystem::path root) {
  DatasetManifest manifest;
  manifest.root = std::move(root);
  require_object(doc, "");
  const json& users = array_member(doc, "users", "");
  for (std::size_t ui = 0; ui < users.size(); ++ui) {
    const std::string uw = "/users/" + std::to_string(ui);
    require_object(users[ui], uw);
    UserRecord user;
    user.user_id = string_member(users[ui], "user_id", uw);
    const json& objects = array_member(users[ui], "objects", uw);
    for (std::size_t oi = 0; oi < objects.size(); ++oi) {
      const std::string ow = uw + "/objects/" + std::to_string(oi);
      require_object(objects[oi], ow);
      ObjectRecord object;
      object.label = string_member(objects[oi], "label", ow);
      const json& videos = array_member(objects[oi], "videos", ow);
      for (std::size_t vi = 0; vi < videos.size(); ++vi) {
        const std::string vw = ow + "/videos/" + std::to_string(vi);
        require_object(videos[vi], vw);
        VideoRecord video;
        video.video_id = string_member(videos[vi], "video_id", vw);
        const std::string kind = string_member(videos[vi], "kind", vw);
        if (kind == "clean") {
          video.kind = VideoKind::kClean;
        } else if (kind == "clutter") {
          video.kind = VideoKind::kClutter;
        } else {
          schema_error(vw + "/kind", "expected \"clean\" or \"clutter\", got \"" + kind + "\"");
        }
        const json& frames = array_member(videos[vi], "frames", vw);
        for (std::size_t fi = 0; fi < frames.size(); ++fi) {
          if (!frames[fi].is_string()) {
            schema_error(vw + "/frames/" + std::to_string(fi), "expected string");
          }
          video.frame_paths.push_back(frames[fi].get<std::string>());
        }
        object.videos.push_back(std::move(video));
      }
      user.objects.push_back(std::move(object));
    }
    manifest.users.push_back(std::move(user));
  }
  validate_manifest(manifest);
  return manifest;
}

void validate_manifest(const DatasetManifest& manifest) {
  auto violation = [](const std::string& what) {
    throw Error(ErrorCode::kInvariantViolation, what);
  };
  if (manifest.users.empty()) violation("manifest has no users");
  std::set<std::string> user_ids;
  std::set<std::string> video_ids;
  for (const auto& u : manifest.users) {
    if (!user_ids.insert(u.user_id).second) violation("duplicate user_id '" + u.user_id + "'");
    if (u.objects.size() < 2) {
      violation("user '" + u.user_id + "' has " + std::to_string(u.objects.size()) +
                " object(s); at least 2 are required");
    }
    std::set<std::string> labels;
    for (const auto& o : u.objects) {
      if (!labels.insert(o.label).second) {
        violation("duplicate label '" + o.label + "' for user '" + u.user_id + "'");
      }
      bool has_clean = false;
      bool has_clutter = false;
      for (const auto& v : o.videos) {
        if (!video_ids.insert(v.video_id).second) {
          violation("duplicate video_id '" + v.video_id + "'");
        }
        if (v.frame_paths.empty()) violation("video '" + v.video_id + "' has no frames");
        has_clean |= v.kind == VideoKind::kClean;
        has_clutter |= v.kind == VideoKind::kClutter;
      }
      if (!has_clean || !has_clutter) {
        violation("object '" + o.label + "' of user '" + u.user_id +
                  "' needs at least one clean and one clutter video");
      }
    }
  }
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  return parse_manifest(doc, path.parent_path());
}

json manifest_to_json(const DatasetManifest& manifest) {
  json users = json::array();
  for (const auto& u : manifest.users) {
    json objects = json::array();
    for (const auto& o : u.objects) {
      json videos = json::array();
      for (const auto& v : o.videos) {
        videos.push_back({{"video_id", v.video_id},
                          {"kind", std::string(to_string(v.kind))},
                          {"frames", v.frame_paths}});
      }
      objects.push_back({{"label", o.label}, {"videos", std::move(videos)}});
    }
    users.push_back({{"user_id", u.user_id}, {"objects", std::move(objects)}});
  }
  return {{"users", std::move(users)}};
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << manifest_to_json(manifest).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

}  // namespace protopipe
