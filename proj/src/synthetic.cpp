#include "protopipe/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"
#include "protopipe/clip_sampling.hpp"
#include "protopipe/error.hpp"
#include "protopipe/frame.hpp"

namespace protopipe {
namespace {

using Rgb = std::array<std::uint8_t, 3>;

constexpr Rgb kBackground{112, 112, 112};
// Ablation scenario: clean videos are shot against a light wall, clutter
// videos on a table; blank clean frames show the table (camera pointed past
// the object).
constexpr Rgb kWall{176, 176, 176};
constexpr Rgb kTable{96, 80, 64};
constexpr double kPi = 3.14159265358979323846;

Rgb hsv(double hue, double sat, double val) {
  hue = hue - std::floor(hue);
  const double h6 = hue * 6.0;
  const int sector = static_cast<int>(h6) % 6;
  const double f = h6 - std::floor(h6);
  const double p = val * (1 - sat), q = val * (1 - sat * f), t = val * (1 - sat * (1 - f));
  double r = 0, g = 0, b = 0;
  switch (sector) {
    case 0: r = val; g = t; b = p; break;
    case 1: r = q; g = val; b = p; break;
    case 2: r = p; g = val; b = t; break;
    case 3: r = p; g = q; b = val; break;
    case 4: r = t; g = p; b = val; break;
    default: r = val; g = p; b = q; break;
  }
  auto to8 = [](double x) { return static_cast<std::uint8_t>(std::lround(255.0 * x)); };
  return {to8(r), to8(g), to8(b)};
}

Rgb darken(const Rgb& c, double factor) {
  return {static_cast<std::uint8_t>(std::lround(c[0] * factor)),
          static_cast<std::uint8_t>(std::lround(c[1] * factor)),
          static_cast<std::uint8_t>(std::lround(c[2] * factor))};
}

// Striped texture: `color` alternating with a darker shade along `angle`.
struct Texture {
  Rgb color;
  double angle = 0.0;
  double period = 8.0;

  Rgb at(int x, int y, double phase) const {
    const double u = x * std::cos(angle) + y * std::sin(angle) + phase;
    const bool light = static_cast<long>(std::floor(2.0 * u / period)) % 2 == 0;
    return light ? color : darken(color, 0.55);
  }
};

struct Appearance {
  Texture body;
};

Appearance object_appearance(const SyntheticSpec& spec, std::size_t user, std::size_t object) {
  const double hue = static_cast<double>(object) / static_cast<double>(spec.objects_per_user) +
                     0.173 * static_cast<double>(user);
  const double angle = kPi * static_cast<double>(object) /
                           static_cast<double>(spec.objects_per_user) +
                       0.31 * static_cast<double>(user);
  return {Texture{hsv(hue, 0.85, 0.9), angle, 8.0}};
}

// The two shared view colours of a user in the ablation scenario.
std::array<Texture, 2> view_textures(std::size_t user) {
  const double base = 0.41 * static_cast<double>(user);
  return {Texture{hsv(base + 0.08, 0.35, 0.95), 0.25 * kPi, 6.0},
          Texture{hsv(base + 0.58, 0.35, 0.45), 0.75 * kPi, 6.0}};
}

struct Rect {
  int x0, y0, x1, y1;  // half-open
};

void put(Frame& f, int x, int y, const Rgb& c) {
  if (x < 0 || y < 0 || x >= f.width || y >= f.height) return;
  for (int ch = 0; ch < 3; ++ch) f.at(x, y, ch) = c[ch];
}

void fill(Frame& f, const Rgb& c) {
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) put(f, x, y, c);
}

void draw_textured(Frame& f, const Rect& r, const Texture& t, double phase) {
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x) put(f, x, y, t.at(x, y, phase));
}

// Ablation objects: top third in the object's own texture, rest in the view texture.
void draw_two_part(Frame& f, const Rect& r, const Texture& body, const Texture& view,
                   double phase) {
  const int split = r.y0 + (r.y1 - r.y0) / 3;
  draw_textured(f, {r.x0, r.y0, r.x1, split}, body, phase);
  draw_textured(f, {r.x0, split, r.x1, r.y1}, view, phase);
}

std::string video_name(std::size_t user, std::size_t object, VideoKind kind, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "u%02zu_o%02zu_%s%zu", user, object,
                kind == VideoKind::kClean ? "clean" : "clutter", index);
  return buf;
}

void write_bytes(const std::filesystem::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

// Frames of the ablation scenario's first object that are blank: the middle third.
bool ablation_blank(const SyntheticSpec& spec, std::size_t object, std::size_t t) {
  const std::size_t third = spec.frames_per_video / 3;
  return object == 0 && t >= third && t < spec.frames_per_video - third;
}

}  // namespace

std::size_t blank_count(const SyntheticSpec& spec) {
  return static_cast<std::size_t>(
      std::lround(spec.blank_fraction * static_cast<double>(spec.frames_per_video)));
}

SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec,
                                            const std::filesystem::path& out) {
  if (spec.num_users < 1 || spec.videos_per_object < 1 || spec.frames_per_video < 1) {
    throw Error(ErrorCode::kInvalidArgument, "all counts must be >= 1");
  }
  if (spec.objects_per_user < 2) {
    throw Error(ErrorCode::kInvalidArgument, "objects_per_user must be >= 2");
  }
  if (spec.frame_size < 16) throw Error(ErrorCode::kInvalidArgument, "frame_size must be >= 16");
  if (!(spec.blank_fraction >= 0.0 && spec.blank_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "blank_fraction must lie in [0, 1]");
  }

  std::error_code ec;
  std::filesystem::create_directories(out / "frames", ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + (out / "frames").string());

  SyntheticDataset result;
  result.manifest.root = out;
  const int size = spec.frame_size;
  const std::size_t frames = spec.frames_per_video;
  const bool ablation = spec.scenario == Scenario::kAblation;

  for (std::size_t u = 0; u < spec.num_users; ++u) {
    UserRecord user;
    char uid[32];
    std::snprintf(uid, sizeof uid, "user%02zu", u);
    user.user_id = uid;
    std::vector<Appearance> looks;
    for (std::size_t o = 0; o < spec.objects_per_user; ++o) looks.push_back(object_appearance(spec, u, o));
    const auto views = view_textures(u);

    for (std::size_t o = 0; o < spec.objects_per_user; ++o) {
      ObjectRecord object;
      char label[32];
      std::snprintf(label, sizeof label, "object%02zu", o);
      object.label = label;

      for (VideoKind kind : {VideoKind::kClean, VideoKind::kClutter}) {
        for (std::size_t vi = 0; vi < spec.videos_per_object; ++vi) {
          VideoRecord video;
          video.video_id = video_name(u, o, kind, vi);
          video.kind = kind;
          std::mt19937_64 rng(derive_seed(spec.seed, video.video_id));
          auto jitter = [&](int amplitude) {
            return std::uniform_int_distribution<int>(-amplitude, amplitude)(rng);
          };

          std::vector<bool> blank(frames, false);
          if (kind == VideoKind::kClean) {
            if (ablation) {
              for (std::size_t t = 0; t < frames; ++t) blank[t] = ablation_blank(spec, o, t);
            } else {
              std::vector<std::size_t> order(frames);
              std::iota(order.begin(), order.end(), 0);
              std::shuffle(order.begin(), order.end(), rng);
              for (std::size_t i = 0; i < blank_count(spec); ++i) blank[order[i]] = true;
            }
            std::vector<std::size_t> indices;
            for (std::size_t t = 0; t < frames; ++t)
              if (blank[t]) indices.push_back(t);
            if (!indices.empty()) result.blank_frames[video.video_id] = indices;
          }

          // Clutter layout is fixed per video: distractor objects in distinct corners.
          struct Distractor {
            std::size_t object;
            Rect rect;
          };
          std::vector<Distractor> distractors;
          if (kind == VideoKind::kClutter) {
            const int count = ablation ? 1 : std::uniform_int_distribution<int>(1, 3)(rng);
            std::array<int, 4> corners{0, 1, 2, 3};
            std::shuffle(corners.begin(), corners.end(), rng);
            const int side = size * 7 / 25;
            for (int i = 0; i < count; ++i) {
              std::size_t other = std::uniform_int_distribution<std::size_t>(
                  0, spec.objects_per_user - 2)(rng);
              if (other >= o) ++other;
              const int cx = corners[i] % 2 ? size - side : 0;
              const int cy = corners[i] / 2 ? size - side : 0;
              distractors.push_back({other, {cx, cy, cx + side, cy + side}});
            }
          }

          const auto dir = std::filesystem::path("frames") / video.video_id;
          std::filesystem::create_directories(out / dir, ec);
          if (ec) throw Error(ErrorCode::kIoError, "cannot create " + (out / dir).string());

          for (std::size_t t = 0; t < frames; ++t) {
            Frame frame(size, size, 3);
            if (!ablation) {
              fill(frame, kBackground);
            } else {
              fill(frame, kind == VideoKind::kClean && !blank[t] ? kWall : kTable);
            }
            const double phase = 0.75 * static_cast<double>(t);
            const Texture& view = views[2 * t < frames ? 0 : 1];
            if (kind == VideoKind::kClean) {
              if (!blank[t]) {
                const int margin = size / 8;
                const int dx = jitter(2), dy = jitter(2);
                const Rect r{margin + dx, margin + dy, size - margin + dx, size - margin + dy};
                if (ablation) {
                  draw_two_part(frame, r, looks[o].body, view, phase);
                } else {
                  draw_textured(frame, r, looks[o].body, phase);
                }
              } else {
                // Drain the jitter stream so non-blank frames do not depend on blank placement.
                jitter(2);
                jitter(2);
              }
            } else {
              const int lo = size / 5, hi = size - size / 5;
              const int dx = jitter(2), dy = jitter(2);
              const Rect r{lo + dx, lo + dy, hi + dx, hi + dy};
              if (ablation) {
                draw_two_part(frame, r, looks[o].body, view, phase);
              } else {
                draw_textured(frame, r, looks[o].body, phase);
              }
              for (const auto& d : distractors) {
                if (ablation) {
                  draw_two_part(frame, d.rect, looks[d.object].body, view, phase);
                } else {
                  draw_textured(frame, d.rect, looks[d.object].body, phase);
                }
              }
            }
            char name[32];
            std::snprintf(name, sizeof name, "%06zu.ppm", t);
            const auto rel = dir / name;
            write_bytes(out / rel, encode_pnm(frame));
            video.frame_paths.push_back(rel.generic_string());
          }
          object.videos.push_back(std::move(video));
        }
      }
      user.objects.push_back(std::move(object));
    }
    result.manifest.users.push_back(std::move(user));
  }

  validate_manifest(result.manifest);
  write_manifest(result.manifest, out / "manifest.json");

  nlohmann::json sidecar = nlohmann::json::object();
  for (const auto& [id, indices] : result.blank_frames) sidecar[id] = indices;
  std::ofstream side(out / "blank_frames.json");
  if (!side) throw Error(ErrorCode::kIoError, "cannot write blank_frames.json");
  side << sidecar.dump(2) << '\n';
  return result;
}

BlankSidecar load_blank_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, path.string());
  try {
    return nlohmann::json::parse(in).get<BlankSidecar>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

}  // namespace protopipe
