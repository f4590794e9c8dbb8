#include "protopipe/embedding.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "protopipe/error.hpp"

namespace protopipe {

using nlohmann::json;

PatchProjection make_patch_projection(int grid, int channels, std::size_t dim,
                                      std::uint64_t seed) {
  if (grid < 1) throw Error(ErrorCode::kInvalidArgument, "grid must be >= 1");
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::kUnsupportedChannels, std::to_string(channels) + " channels");
  }
  const std::size_t n = static_cast<std::size_t>(grid) * grid * channels;
  if (dim < 2 || dim > n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "embedding dim " + std::to_string(dim) + " outside [2, " + std::to_string(n) + "]");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix m(n, dim);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < dim; ++c) m(r, c) = gauss(rng);

  for (std::size_t c = 0; c < dim; ++c) {
    for (std::size_t prev = 0; prev < c; ++prev) {
      double proj = 0.0;
      for (std::size_t r = 0; r < n; ++r) proj += m(r, c) * m(r, prev);
      for (std::size_t r = 0; r < n; ++r) m(r, c) -= proj * m(r, prev);
    }
    double len = 0.0;
    for (std::size_t r = 0; r < n; ++r) len += m(r, c) * m(r, c);
    len = std::sqrt(len);
    for (std::size_t r = 0; r < n; ++r) m(r, c) /= len;
  }
  return PatchProjection{grid, channels, std::move(m)};
}

namespace {

Matrix matrix_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw Error(ErrorCode::kShapeMismatch, field);
  std::vector<Vector> rows;
  for (const auto& r : j) {
    if (!r.is_array()) throw Error(ErrorCode::kShapeMismatch, field);
    rows.push_back(r.get<Vector>());
  }
  try {
    return Matrix::from_rows(rows);
  } catch (const Error&) {
    throw Error(ErrorCode::kShapeMismatch, field);
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

}  // namespace

PatchProjection load_patch_projection(const std::filesystem::path& path) {
  const json doc = read_json_file(path);
  try {
    PatchProjection p;
    p.grid = doc.at("grid").get<int>();
    p.channels = doc.at("channels").get<int>();
    const auto dim = doc.at("dim").get<std::size_t>();
    p.projection = matrix_from_json(doc.at("projection"), "projection");
    if (p.projection.rows() != p.input_dim() || p.projection.cols() != dim) {
      throw Error(ErrorCode::kShapeMismatch,
                  "projection is " + std::to_string(p.projection.rows()) + "x" +
                      std::to_string(p.projection.cols()) + ", expected " +
                      std::to_string(p.input_dim()) + "x" + std::to_string(dim));
    }
    if (dim < 2) throw Error(ErrorCode::kShapeMismatch, "dim must be >= 2");
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

json patch_projection_to_json(const PatchProjection& p) {
  json rows = json::array();
  for (std::size_t r = 0; r < p.projection.rows(); ++r) rows.push_back(p.projection.row_vector(r));
  return {{"grid", p.grid}, {"channels", p.channels}, {"dim", p.dim()}, {"projection", rows}};
}

Vector downsample_features(const Frame& frame, int grid) {
  if (frame.width < grid || frame.height < grid) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                    " frame is smaller than the " + std::to_string(grid) + "x" +
                    std::to_string(grid) + " grid");
  }
  const auto g = static_cast<std::size_t>(grid);
  Vector out(g * g * static_cast<std::size_t>(frame.channels), 0.0);
  for (int gy = 0; gy < grid; ++gy) {
    const int y0 = gy * frame.height / grid;
    const int y1 = (gy + 1) * frame.height / grid;
    for (int gx = 0; gx < grid; ++gx) {
      const int x0 = gx * frame.width / grid;
      const int x1 = (gx + 1) * frame.width / grid;
      const double cells = static_cast<double>((y1 - y0) * (x1 - x0));
      for (int c = 0; c < frame.channels; ++c) {
        double sum = 0.0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) sum += frame.at(x, y, c);
        out[static_cast<std::size_t>(c) * g * g + static_cast<std::size_t>(gy) * g + gx] =
            sum / (255.0 * cells);
      }
    }
  }
  return out;
}

Vector embed_frame(const Frame& frame, const PatchProjection& spec) {
  if (frame.channels != spec.channels) {
    throw Error(ErrorCode::kDimensionMismatch,
                "frame has " + std::to_string(frame.channels) + " channels, embedder expects " +
                    std::to_string(spec.channels));
  }
  return vecmat(downsample_features(frame, spec.grid), spec.projection);
}

Vector embed_clip(const std::vector<Frame>& frames, const PatchProjection& spec) {
  if (frames.empty()) throw Error(ErrorCode::kEmptyClip, "clip has no frames");
  std::vector<Vector> rows;
  rows.reserve(frames.size());
  for (const auto& f : frames) rows.push_back(embed_frame(f, spec));
  return mean_rows(Matrix::from_rows(rows));
}

Vector pool_frames(const std::vector<Vector>& frame_embeddings,
                   const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw Error(ErrorCode::kEmptyClip, "clip has no frames");
  Vector out(frame_embeddings.at(indices.front()).size(), 0.0);
  for (std::size_t i : indices) {
    const Vector& v = frame_embeddings.at(i);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += v[c];
  }
  for (double& x : out) x /= static_cast<double>(indices.size());
  return out;
}

const std::vector<Vector>& PrecomputedEmbeddings::video(const std::string& video_id) const {
  auto it = videos.find(video_id);
  if (it == videos.end()) {
    throw Error(ErrorCode::kMissingFrameEmbedding, "no embeddings for video '" + video_id + "'");
  }
  return it->second;
}

PrecomputedEmbeddings parse_precomputed(const json& doc, const DatasetManifest* expected) {
  PrecomputedEmbeddings out;
  if (!doc.is_object() || !doc.contains("dim") || !doc.contains("videos") ||
      !doc["dim"].is_number_integer() || doc["dim"].get<long long>() < 0 ||
      !doc["videos"].is_object()) {
    throw Error(ErrorCode::kParseError, "expected {\"dim\":int,\"videos\":{...}}");
  }
  out.dim = doc["dim"].get<std::size_t>();
  for (const auto& [video_id, rows] : doc["videos"].items()) {
    if (!rows.is_array()) throw Error(ErrorCode::kParseError, "videos/" + video_id);
    auto& table = out.videos[video_id];
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].is_null()) {
        throw Error(ErrorCode::kMissingFrameEmbedding,
                    "video '" + video_id + "' frame " + std::to_string(i));
      }
      if (!rows[i].is_array()) {
        throw Error(ErrorCode::kParseError, "videos/" + video_id + "/" + std::to_string(i));
      }
      Vector v;
      try {
        v = rows[i].get<Vector>();
      } catch (const json::exception& e) {
        throw Error(ErrorCode::kParseError, "videos/" + video_id + "/" + std::to_string(i));
      }
      if (v.size() != out.dim) {
        throw Error(ErrorCode::kInconsistentDim, "video '" + video_id + "' frame " +
                                                     std::to_string(i) + " has " +
                                                     std::to_string(v.size()) + " values, dim is " +
                                                     std::to_string(out.dim));
      }
      table.push_back(std::move(v));
    }
  }
  if (expected) {
    for (const auto& u : expected->users)
      for (const auto& o : u.objects)
        for (const auto& v : o.videos) {
          auto it = out.videos.find(v.video_id);
          const std::size_t have = it == out.videos.end() ? 0 : it->second.size();
          if (have < v.frame_paths.size()) {
            throw Error(ErrorCode::kMissingFrameEmbedding,
                        "video '" + v.video_id + "' frame " + std::to_string(have));
          }
        }
  }
  return out;
}

PrecomputedEmbeddings load_precomputed(const std::filesystem::path& path,
                                       const DatasetManifest* expected) {
  return parse_precomputed(read_json_file(path), expected);
}

}  // namespace protopipe
