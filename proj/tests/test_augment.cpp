#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "voxelforge/augment.hpp"
#include "voxelforge/augment_json.hpp"
#include "voxelforge/noise.hpp"
#include "voxelforge/pipeline.hpp"

using namespace vf;

namespace {

AugmentSpec identity_spec() {
  AugmentSpec s;
  s.window_lower = {0.0, 0.0};
  s.window_upper = {1.0, 1.0};
  return s;
}

AugmentSpec busy_spec(std::uint64_t seed) {
  AugmentSpec s;
  for (auto& r : s.rotation_rad) r = {-0.3, 0.3};
  for (auto& r : s.scale) r = {0.85, 1.15};
  s.shear = {-0.1, 0.1};
  s.reflect_prob = {0.5, 0.5, 0.5};
  s.affine_perturb = {-0.05, 0.05};
  s.displacement_vox = {4, 4, 2};
  s.occlusion_max_vox = 5;
  s.noise_sigma = {0, 30};
  s.window_lower = {-200, -100};
  s.window_upper = {180, 260};
  s.seed = seed;
  return s;
}

BatchItem unit_item(const Dims& d, std::uint64_t salt) {
  BatchItem it{Volume(d, {1, 1, 1}), LabelMap(d, {1, 1, 1})};
  std::mt19937_64 rng(salt);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& v : it.image.storage()) v = u(rng);
  for (std::size_t i = 0; i < it.labels.size(); ++i) it.labels[i] = static_cast<std::uint8_t>((i + salt) % 6);
  return it;
}

BatchItem hu_item(const Dims& d, std::uint64_t salt) {
  BatchItem it = unit_item(d, salt);
  for (auto& v : it.image.storage()) v = -1000.0f + 1400.0f * v;
  return it;
}

}  // namespace

TEST(Philox, KnownAnswers) {
  EXPECT_EQ(Philox4x32::generate({0, 0, 0, 0}, {0, 0}),
            (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(CounterStream, UniformRangeAndDegenerate) {
  CounterStream s(17);
  for (int i = 0; i < 10000; ++i) {
    const double u = s.uniform01();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  EXPECT_EQ(s.uniform(2.5, 2.5), 2.5);
  const auto before = s.draws();
  s.bernoulli(0.0);
  EXPECT_EQ(s.draws(), before + 1);
}

TEST(Noise, ZeroSigmaIsZero) {
  auto n = generate_noise({8, 8, 8}, 0.0, 3);
  for (float v : n.storage()) EXPECT_EQ(v, 0.0f);
  EXPECT_THROW(generate_noise({2, 2, 2}, -1.0, 3), InvalidArgument);
}

TEST(Noise, ThreadCountInvariant) {
  const Dims d{50, 40, 30};
  auto a = generate_noise(d, 2.0, 99, 1);
  EXPECT_EQ(a, generate_noise(d, 2.0, 99, 2));
  EXPECT_EQ(a, generate_noise(d, 2.0, 99, 8));
  EXPECT_NE(a, generate_noise(d, 2.0, 100, 1));
}

TEST(Noise, Statistics) {
  auto n = generate_noise({100, 100, 100}, 1.0, 2718281828);
  const auto& v = n.storage();
  double mean = 0;
  for (float x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0, lag = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    var += (v[i] - mean) * (v[i] - mean);
    if (i + 1 < v.size()) lag += (v[i] - mean) * (v[i + 1] - mean);
  }
  EXPECT_LT(std::abs(mean), 0.004);
  EXPECT_LT(std::abs(std::sqrt(var / static_cast<double>(v.size() - 1)) - 1.0), 0.01);
  EXPECT_LT(std::abs(lag / var), 0.005);
}

TEST(SampleParams, DegenerateRangesGiveIdentity) {
  auto p = sample_params(identity_spec(), {10, 12, 14}, 5);
  EXPECT_EQ(p.A, identity3());
  EXPECT_EQ(p.b_offset, (Vec3d{0, 0, 0}));
  EXPECT_EQ(p.occlusion_height, 0.0);
  EXPECT_EQ(p.noise_sigma, 0.0);
}

TEST(SampleParams, CentreDisplacement) {
  const Vec3d c = volume_center({11, 11, 11});
  EXPECT_EQ(c, (Vec3d{5, 5, 5}));
  auto b = centered_offset(identity3(), c, {5, 0, 0});
  EXPECT_EQ(b, (Vec3d{5, 0, 0}));
}

TEST(SampleParams, ReflectionKeepsCentre) {
  AugmentSpec s = identity_spec();
  s.reflect_prob = {1.0, 0.0, 0.0};
  s.displacement_vox = {3, 3, 3};
  const Dims d{20, 16, 12};
  auto p = sample_params(s, d, 8);
  EXPECT_EQ(p.A, (Mat3{{{-1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}));
  const Vec3d c = volume_center(d);
  const Vec3d ac = p.A * c;
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(ac[k] + p.b_offset[k], c[k] + p.displacement[k], 1e-12);
}

TEST(SampleParams, CompositionOrder) {
  AugmentSpec s = identity_spec();
  s.rotation_rad[2] = {0.4, 0.4};
  s.scale[0] = {2.0, 2.0};
  auto p = sample_params(s, {8, 8, 8}, 1);
  // Rz * S: scaling acts on input x before the rotation.
  const Mat3 want = rotation_z(0.4) * Mat3{{{2, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(p.A[r][c], want[r][c]);
}

TEST(SampleParams, RangesRespected) {
  auto s = busy_spec(3);
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    auto p = sample_params(s, {30, 30, 20}, seed);
    EXPECT_GT(std::abs(det(p.A)), 1e-9);
    EXPECT_GE(p.occlusion_height, 0.0);
    EXPECT_LE(p.occlusion_height, 5.0);
    EXPECT_GE(p.occlusion_start, -5.0);
    EXPECT_LE(p.occlusion_start, 19.0);
    EXPECT_LT(p.window_lo, p.window_hi);
    EXPECT_GE(p.noise_sigma, 0.0);
    EXPECT_LE(p.noise_sigma, 30.0);
    for (int k = 0; k < 3; ++k) EXPECT_LE(std::abs(p.displacement[k]), s.displacement_vox[k]);
  }
}

TEST(SampleParams, WindowRejection) {
  AugmentSpec s = identity_spec();
  s.window_lower = {0.0, 10.0};
  s.window_upper = {5.0, 6.0};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto p = sample_params(s, {4, 4, 4}, seed);
    EXPECT_LT(p.window_lo, p.window_hi);
  }
  AugmentSpec bad = identity_spec();
  bad.window_lower = {10.0, 10.0};
  bad.window_upper = {5.0, 5.0};
  EXPECT_THROW(sample_params(bad, {4, 4, 4}, 1), InvalidArgument);
}

TEST(Window, Formula) {
  EXPECT_NEAR(window_value(40.0, -150.0, 230.0), 0.5, 1e-15);
  EXPECT_EQ(window_value(-2000.0, -150.0, 230.0), 0.0);
  EXPECT_EQ(window_value(2000.0, -150.0, 230.0), 1.0);
  double prev = 0.0;
  for (double v = -300.0; v <= 300.0; v += 0.5) {
    const double w = window_value(v, -150.0, 230.0);
    EXPECT_GE(w, prev);
    prev = w;
  }
}

TEST(Apply, IdentityIsExact) {
  auto it = unit_item({13, 11, 9}, 4);
  TransformParams p;
  auto out = apply(it.image, it.labels, p);
  EXPECT_EQ(out.image, it.image);
  EXPECT_EQ(out.labels, it.labels);
}

TEST(Apply, IntegerShiftSamplesExactly) {
  auto it = unit_item({10, 10, 10}, 5);
  TransformParams p;
  p.b_offset = {2, -1, 3};
  auto out = apply(it.image, it.labels, p);
  for (std::size_t z = 0; z < 7; ++z)
    for (std::size_t y = 1; y < 10; ++y)
      for (std::size_t x = 0; x < 8; ++x) {
        ASSERT_EQ(out.image(x, y, z), it.image(x + 2, y - 1, z + 3));
        ASSERT_EQ(out.labels(x, y, z), it.labels(x + 2, y - 1, z + 3));
      }
  EXPECT_EQ(out.image(9, 5, 5), 0.0f);  // out of bounds: fill 0
}

TEST(Apply, QuarterTurnIsPermutation) {
  const Dims d{24, 24, 6};
  auto it = unit_item(d, 6);
  TransformParams p;
  p.A = {{{0, -1, 0}, {1, 0, 0}, {0, 0, 1}}};
  p.b_offset = centered_offset(p.A, volume_center(d), {0, 0, 0});
  auto out = apply(it.image, it.labels, p);
  for (std::size_t z = 0; z < d.z; ++z)
    for (std::size_t y = 0; y < d.y; ++y)
      for (std::size_t x = 0; x < d.x; ++x) {
        ASSERT_EQ(out.image(x, y, z), it.image(d.y - 1 - y, x, z));
        ASSERT_EQ(out.labels(x, y, z), it.labels(d.y - 1 - y, x, z));
      }
}

TEST(Apply, FullOcclusionBlanksImageOnly) {
  auto it = hu_item({8, 8, 8}, 7);
  TransformParams p;
  p.window_lo = -150;
  p.window_hi = 230;
  p.occlusion_start = 0;
  p.occlusion_height = 8;
  p.noise_sigma = 50;
  auto out = apply(it.image, it.labels, p);
  for (float v : out.image.storage()) EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(out.labels, it.labels);
  auto zeroed = apply(it.image, it.labels, p, {.occlude_labels = true});
  EXPECT_EQ(count_nonzero(zeroed.labels), 0u);
}

TEST(Apply, OcclusionIsHalfOpenAndInputIndependent) {
  auto a = hu_item({6, 6, 10}, 1);
  auto b = hu_item({6, 6, 10}, 2);
  TransformParams p;
  p.window_lo = -150;
  p.window_hi = 230;
  p.occlusion_start = 2.5;
  p.occlusion_height = 3.0;  // covers z = 3, 4, 5
  auto oa = apply(a.image, a.labels, p);
  auto ob = apply(b.image, b.labels, p);
  for (std::size_t z = 0; z < 10; ++z) {
    const bool blank = z >= 3 && z <= 5;
    for (std::size_t y = 0; y < 6; ++y)
      for (std::size_t x = 0; x < 6; ++x) {
        if (blank) {
          ASSERT_EQ(oa.image(x, y, z), 0.0f);
          ASSERT_EQ(ob.image(x, y, z), 0.0f);
        } else {
          ASSERT_EQ(oa.image(x, y, z), static_cast<float>(window_value(a.image(x, y, z), -150, 230)));
        }
      }
  }
  p.occlusion_start = 3.0;
  p.occlusion_height = 0.0;
  EXPECT_EQ(apply(a.image, a.labels, p).image(0, 0, 3), static_cast<float>(window_value(a.image(0, 0, 3), -150, 230)));
}

TEST(Apply, OutputInUnitIntervalAndLabelsPhotometricInvariant) {
  auto it = hu_item({16, 16, 12}, 8);
  auto spec = busy_spec(11);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto p = sample_params(spec, it.image.dims(), seed);
    auto out = apply(it.image, it.labels, p);
    for (float v : out.image.storage()) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
    }
    TransformParams q = p;
    q.noise_sigma = 0.0;
    q.window_lo = -1000;
    q.window_hi = 1000;
    q.noise_seed ^= 0xABCD;
    EXPECT_EQ(apply(it.image, it.labels, q).labels, out.labels);
  }
}

TEST(Apply, NoiseUsesLinearIndex) {
  Volume img({6, 5, 4}, {1, 1, 1}, 0.0f);
  LabelMap lab(img.dims(), img.spacing());
  TransformParams p;
  p.window_lo = -100;
  p.window_hi = 100;
  p.noise_sigma = 10;
  p.noise_seed = 4321;
  auto out = apply(img, lab, p);
  for (std::size_t i = 0; i < img.size(); ++i)
    ASSERT_EQ(out.image[i], static_cast<float>(window_value(10.0 * normal_at(4321, i), -100, 100)));
}

TEST(Apply, ThreadCountInvariant) {
  auto it = hu_item({20, 18, 16}, 9);
  auto p = sample_params(busy_spec(2), it.image.dims(), 3);
  auto one = apply(it.image, it.labels, p, {.threads = 1});
  auto many = apply(it.image, it.labels, p, {.threads = 8});
  EXPECT_EQ(one.image, many.image);
  EXPECT_EQ(one.labels, many.labels);
}

TEST(Apply, Errors) {
  auto it = unit_item({4, 4, 4}, 1);
  TransformParams p;
  p.A = {{{1, 0, 0}, {0, 0, 0}, {0, 0, 1}}};
  EXPECT_THROW(apply(it.image, it.labels, p), InvalidArgument);
  LabelMap other({4, 4, 5}, {1, 1, 1});
  EXPECT_THROW(apply(it.image, other, TransformParams{}), InvalidArgument);
}

TEST(Pipeline, SeedIsolationAcrossBatchSizes) {
  auto spec = busy_spec(77);
  std::vector<BatchItem> batch;
  for (int i = 0; i < 32; ++i) batch.push_back(hu_item({12, 12, 10}, i));
  auto single = pipeline_run(std::span(batch).first(1), spec);
  auto all = pipeline_run(batch, spec);
  ASSERT_EQ(all.size(), 32u);
  EXPECT_EQ(single[0].image, all[0].image);
  EXPECT_EQ(single[0].params, all[0].params);
}

TEST(Pipeline, DepthDoesNotChangeResults) {
  auto spec = busy_spec(5);
  std::vector<BatchItem> batch;
  for (int i = 0; i < 9; ++i) batch.push_back(hu_item({10, 9, 8}, 100 + i));
  auto seq = pipeline_run(batch, spec, {.depth = 1});
  for (std::size_t depth : {2, 3, 8}) {
    std::vector<std::size_t> order;
    auto res = pipeline_run(batch, spec, {.depth = depth}, [&](std::size_t i, const AugmentedPair&) { order.push_back(i); });
    ASSERT_EQ(res.size(), seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
      EXPECT_EQ(res[i].image, seq[i].image);
      EXPECT_EQ(res[i].labels, seq[i].labels);
    }
    for (std::size_t i = 0; i < order.size(); ++i) EXPECT_EQ(order[i], i);
  }
}

TEST(Pipeline, EmptyBatchRejected) {
  std::vector<BatchItem> none;
  EXPECT_THROW(pipeline_run(none, busy_spec(1)), InvalidArgument);
}

TEST(Pipeline, FailureCarriesItemIndex) {
  std::vector<BatchItem> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(hu_item({6, 6, 6}, i));
  batch[4].labels = LabelMap({6, 6, 7}, {1, 1, 1});
  for (std::size_t depth : {1, 4}) {
    try {
      pipeline_run(batch, busy_spec(1), {.depth = depth});
      FAIL() << "expected PipelineError";
    } catch (const PipelineError& e) {
      EXPECT_EQ(e.index(), 4u);
      EXPECT_NE(std::string(e.what()).find("item 4"), std::string::npos);
    }
  }
}

TEST(BoundedQueue, ClosedQueueDrains) {
  BoundedQueue<int> q(2);
  q.push(1);
  q.push(2);
  q.close();
  EXPECT_EQ(q.pop(), std::optional<int>(1));
  EXPECT_EQ(q.pop(), std::optional<int>(2));
  EXPECT_EQ(q.pop(), std::nullopt);
}

TEST(SpecJson, RoundTripAndUnknownField) {
  auto s = busy_spec(42);
  nlohmann::json j = s;
  auto back = j.get<AugmentSpec>();
  EXPECT_EQ(nlohmann::json(back), j);
  j["bogus"] = 1;
  EXPECT_THROW(j.get<AugmentSpec>(), InvalidArgument);
  nlohmann::json bad = {{"reflect_prob", {0.5, 2.0, 0.0}}};
  EXPECT_THROW(bad.get<AugmentSpec>(), InvalidArgument);
}

TEST(ParamsJson, RoundTrip) {
  auto p = sample_params(busy_spec(3), {20, 20, 20}, 9);
  nlohmann::json j = p;
  EXPECT_EQ(j.get<TransformParams>(), p);
}
