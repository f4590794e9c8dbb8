#include <cmath>

#include "doctest.h"
#include "protopipe/error.hpp"
#include "protopipe/protonet.hpp"
#include "protopipe/synthetic.hpp"
#include "test_util.hpp"

using namespace protopipe;

namespace {

Prototypes axis_prototypes() {
  Prototypes p;
  p.labels = {"a", "b"};
  p.raw = Matrix{{1, 0}, {0, 1}};
  p.adapted = p.raw;
  return p;
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::kInvalidArgument;
}

// Small generated dataset shared by the end-to-end cases.
struct Fixture {
  protopipe::testing::TempDir dir{"protonet"};
  SyntheticDataset data;

  explicit Fixture(double blank_fraction = 0.0, std::size_t objects = 2, std::size_t frames = 24) {
    SyntheticSpec spec;
    spec.num_users = 2;
    spec.objects_per_user = objects;
    spec.videos_per_object = 1;
    spec.frames_per_video = frames;
    spec.frame_size = 32;
    spec.blank_fraction = blank_fraction;
    data = generate_synthetic_dataset(spec, dir.path());
  }

  FeatureExtractor features() const {
    return FeatureExtractor(data.manifest, make_patch_projection(8, 3, 32, 1234),
                            EdgeFilterConfig{}, LoaderConfig{});
  }
};

SamplerConfig sampler(std::size_t L, std::size_t K) {
  SamplerConfig s;
  s.clip_length = L;
  s.clips_per_video = K;
  return s;
}

}  // namespace

TEST_CASE("prototypes are class means") {
  const auto m = compute_prototypes({{{1, 0}, {0, 1}}, {{3, 3}}}, {"x", "y"});
  CHECK(m == Matrix{{0.5, 0.5}, {3, 3}});
  const auto dup = compute_prototypes({{{1, 0}, {0, 1}, {1, 0}, {0, 1}}, {{3, 3}, {3, 3}}}, {"x", "y"});
  CHECK(dup == m);
  try {
    compute_prototypes({{{1, 0}}, {}}, {"x", "y"});
    FAIL("expected EmptyClass");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyClass);
    CHECK(std::string(e.what()).find("y") != std::string::npos);
  }
}

TEST_CASE("cosine classification") {
  const auto p = axis_prototypes();
  const Vector q = {0.9, 0.1};
  auto c = classify_clip(q, p);
  CHECK(c.index == 0);
  CHECK(c.scores[0] == doctest::Approx(0.99388373).epsilon(1e-8));
  CHECK(c.scores[1] == doctest::Approx(0.11043153).epsilon(1e-7));

  const Vector tripled = {2.7, 0.3};
  const auto c3 = classify_clip(tripled, p);
  CHECK(c3.index == 0);
  CHECK(std::abs(c3.scores[0] - c.scores[0]) < 1e-15);
  CHECK(std::abs(c3.scores[1] - c.scores[1]) < 1e-15);

  const Vector exact = {0.0, 1.0};
  c = classify_clip(exact, p);
  CHECK(c.index == 1);
  CHECK(c.scores[1] == 1.0);

  const Vector tie = {1.0, 1.0};
  CHECK(classify_clip(tie, p).index == 0);

  const Vector wrong = {1.0, 0.0, 0.0};
  CHECK(code_of([&] { classify_clip(wrong, p); }) == ErrorCode::kDimensionMismatch);
}

TEST_CASE("classification uses the requested matrix") {
  auto p = axis_prototypes();
  p.adapted = Matrix{{0, 1}, {1, 0}};
  const Vector q = {1.0, 0.0};
  CHECK(classify_clip(q, p, false).index == 0);
  CHECK(classify_clip(q, p, true).index == 1);
}

TEST_CASE("frame accuracy") {
  CHECK(frame_accuracy({0, 1, 2}, {0, 1, 2}) == 1.0);
  CHECK(frame_accuracy({0, 1, 0, 1}, {0, 0, 0, 0}) == 0.5);
  CHECK(code_of([] { frame_accuracy({0}, {0, 1}); }) == ErrorCode::kLengthMismatch);
  CHECK(code_of([] { frame_accuracy({}, {}); }) == ErrorCode::kEmptyInput);

  // Micro within a user: 3 of 4 frames, not the mean of per-video rates.
  const auto acc = per_user_accuracy({{"u1", {0, 0, 0}, {0, 0, 0}},
                                      {"u1", {1}, {0}},
                                      {"u2", {1, 1}, {1, 0}}});
  CHECK(acc.at("u1") == 0.75);
  CHECK(acc.at("u2") == 0.5);
}

TEST_CASE("episodes split clean and clutter") {
  Fixture fx;
  const auto ep = build_episode(fx.data.manifest, "user01");
  CHECK(ep.labels.size() == 2);
  CHECK(ep.support.size() == 2);
  for (const auto& videos : ep.support)
    for (const auto* v : videos) CHECK(v->kind == VideoKind::kClean);
  CHECK(ep.query.size() == 2);
  for (const auto& [v, label] : ep.query) {
    CHECK(v->kind == VideoKind::kClutter);
    CHECK(fx.data.manifest.find_video(v->video_id).second == ep.labels[label]);
  }
  CHECK(code_of([&] { build_episode(fx.data.manifest, "nobody"); }) == ErrorCode::kUnknownUser);
}

TEST_CASE("personalize is deterministic and separable") {
  Fixture fx;
  const auto ep = build_episode(fx.data.manifest, "user00");
  PersonalizeOptions opt;
  opt.sampler = sampler(4, 3);
  const auto w = centering_transformer_weights(32, 64, 0.5);
  opt.adapter = &w;

  auto f1 = fx.features();
  auto f2 = fx.features();
  const auto a = personalize(ep, f1, opt);
  const auto b = personalize(ep, f2, opt);
  CHECK(a.prototypes.raw == b.prototypes.raw);
  CHECK(a.prototypes.adapted == b.prototypes.adapted);
  CHECK(a.prototypes.labels == ep.labels);
  CHECK(a.prototypes.user_id == "user00");
  CHECK_FALSE(a.prototypes.raw == a.prototypes.adapted);

  // Every sampled clip is closer to its own prototype than the prototypes are to each other.
  const double inter = cosine_similarity(a.prototypes.raw.row(0), a.prototypes.raw.row(1));
  for (std::size_t k = 0; k < 2; ++k) {
    for (const auto* v : ep.support[k]) {
      const auto& emb = f1.embeddings(*v);
      for (const auto& clip : uniform_sample_clips(emb.size(), opt.sampler)) {
        std::vector<std::size_t> idx;
        for (std::size_t t = clip.start; t < clip.start + clip.length; ++t) idx.push_back(t);
        const auto q = pool_frames(emb, idx);
        CHECK(cosine_similarity(q, a.prototypes.raw.row(k)) > inter);
      }
    }
  }

  PersonalizeOptions plain = opt;
  plain.adapter = nullptr;
  const auto c = personalize(ep, f1, plain);
  CHECK(c.prototypes.adapted == c.prototypes.raw);
  CHECK(c.prototypes.raw == a.prototypes.raw);
}

TEST_CASE("mostly blank clips are removed and logged") {
  Fixture fx(0.75, 2, 32);
  const auto ep = build_episode(fx.data.manifest, "user00");
  PersonalizeOptions opt;
  opt.sampler = sampler(8, 4);
  auto features = fx.features();
  const auto r = personalize(ep, features, opt);
  CHECK(r.prototypes.raw.rows() == 2);
  CHECK(r.audit.size() == 8);

  std::size_t removed = 0, kept = 0;
  for (const auto& a : r.audit) {
    // Invalid counts agree with the generator's sidecar.
    const auto& blanks = fx.data.blank_frames.at(a.video_id);
    std::size_t expected = 0;
    for (auto t : blanks) expected += t >= a.clip_start && t < a.clip_start + a.length;
    CHECK(a.invalid == expected);
    CHECK(a.removed == (2 * a.invalid > a.length && !a.override_kept));
    removed += a.removed;
    kept += !a.removed;
  }
  CHECK(removed > 0);
  CHECK(kept >= 2);

  PersonalizeOptions off = opt;
  off.edge_filter.enabled = false;
  for (const auto& a : personalize(ep, features, off).audit) CHECK_FALSE(a.removed);
}

TEST_CASE("recognize gives one prediction per frame") {
  Fixture fx;
  const auto ep = build_episode(fx.data.manifest, "user00");
  PersonalizeOptions opt;
  opt.sampler = sampler(4, 3);
  auto features = fx.features();
  const auto protos = personalize(ep, features, opt).prototypes;
  std::size_t correct = 0, total = 0;
  for (const auto& [v, label] : ep.query) {
    const auto pred = recognize_video(*v, protos, 4, features);
    CHECK(pred.video_id == v->video_id);
    CHECK(pred.per_frame.size() == v->frame_paths.size());
    for (const auto& f : pred.per_frame) {
      CHECK(f.scores.size() == 2);
      correct += f.index == label;
      ++total;
    }
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(total) >= 0.95);

  // A one-frame video padded to a full window.
  VideoRecord single = *ep.query[0].first;
  single.video_id += "_single";
  single.frame_paths.resize(1);
  const auto one = recognize_video(single, protos, 8, features);
  CHECK(one.per_frame.size() == 1);

  Prototypes wrong_dim = protos;
  wrong_dim.raw = Matrix(2, 5);
  wrong_dim.adapted = wrong_dim.raw;
  CHECK(code_of([&] { recognize_video(*ep.query[0].first, wrong_dim, 4, features); }) ==
        ErrorCode::kDimensionMismatch);
}
