#include <doctest.h>

#include <cmath>
#include <numeric>

#include "dualcnn/datagen.hpp"
#include "dualcnn/errors.hpp"
#include "dualcnn/formation.hpp"
#include "dualcnn/metrics.hpp"
#include "support.hpp"

using namespace dualcnn;
using testing::max_abs_diff;
using testing::random_tensor;

namespace {

double catmull_rom(double t) {
  t = std::abs(t);
  if (t < 1) return 1.5 * t * t * t - 2.5 * t * t + 1;
  if (t < 2) return -0.5 * t * t * t + 2.5 * t * t - 4 * t + 2;
  return 0;
}

// Pixel-centre aligned, clamp-to-edge, evaluated as a 4x4 tensor-product sum.
Tensor bicubic_oracle(const Tensor& in, std::size_t oh, std::size_t ow) {
  const double ry = double(in.height()) / oh, rx = double(in.width()) / ow;
  Tensor out(in.channels(), oh, ow);
  auto clampi = [](long v, long n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };
  for (std::size_t c = 0; c < in.channels(); ++c)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        const double sy = (y + 0.5) * ry - 0.5, sx = (x + 0.5) * rx - 0.5;
        const long by = long(std::floor(sy)), bx = long(std::floor(sx));
        double acc = 0;
        for (long j = -1; j <= 2; ++j)
          for (long i = -1; i <= 2; ++i)
            acc += catmull_rom(sy - (by + j)) * catmull_rom(sx - (bx + i)) *
                   in.at(c, clampi(by + j, in.height()), clampi(bx + i, in.width()));
        out.at(c, y, x) = acc;
      }
  return out;
}

}  // namespace

TEST_CASE("gaussian kernel is normalized") {
  for (double sigma : {0.1, 0.5, 1.0, 1.5, 2.0, 3.7, 10.0}) {
    const auto k = gaussian_kernel_1d(sigma);
    CHECK(k.size() == 2 * std::size_t(std::ceil(3 * sigma)) + 1);
    CHECK(std::abs(std::accumulate(k.begin(), k.end(), 0.0) - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(gaussian_kernel_1d(0.0), ValidationError);
  CHECK_THROWS_AS(gaussian_kernel_1d(-1.0), ValidationError);
}

TEST_CASE("gaussian smoothing") {
  CHECK(max_abs_diff(gaussian_smooth(Tensor(1, 7, 9, 0.3), 2.0), Tensor(1, 7, 9, 0.3)) < 1e-15);
  std::mt19937_64 rng(2);
  const Tensor img = random_tensor({1, 13, 17}, rng, 0.0, 1.0);
  CHECK(max_abs_diff(gaussian_smooth(img, 0.1), img) < 1e-6);
  CHECK(max_abs_diff(gaussian_smooth(img, 2.0), testing::gaussian_oracle(img, 2.0)) < 1e-12);
  // Wider than the image: reflection wraps more than once.
  const Tensor small = random_tensor({1, 4, 3}, rng, 0.0, 1.0);
  CHECK(max_abs_diff(gaussian_smooth(small, 1.5), testing::gaussian_oracle(small, 1.5)) < 1e-12);
}

TEST_CASE("structure/detail split") {
  std::mt19937_64 rng(3);
  // Within a factor of two the subtraction is exact, so the sum restores X bit for bit.
  for (int i = 0; i < 20; ++i) {
    const Tensor x = random_tensor({1, 11, 12}, rng, 0.5, 1.0);
    const auto sd = split_structure_detail(x, 2.0);
    CHECK(add(sd.structure, sd.detail) == x);
  }
  // Elsewhere the sum can land one rounding step away.
  for (int i = 0; i < 20; ++i) {
    const Tensor x = random_tensor({1, 11, 12}, rng, 0.0, 1.0);
    const auto sd = split_structure_detail(x, 2.0);
    CHECK(max_abs_diff(add(sd.structure, sd.detail), x) <= 0x1p-53);
  }
  const auto flat = split_structure_detail(Tensor(1, 8, 8, 0.4), 2.0);
  CHECK(max_abs_diff(flat.detail, Tensor(1, 8, 8)) == 0.0);
  const auto big = split_structure_detail(random_tensor({1, 128, 128}, rng, 0.0, 1.0), 2.0);
  CHECK(std::abs(big.detail.mean()) < 0.01);
}

TEST_CASE("bicubic resize") {
  const Tensor flat(1, 6, 10, 0.7);
  CHECK(max_abs_diff(bicubic_resize(flat, {3, 1}), Tensor(1, 18, 30, 0.7)) < 1e-14);
  CHECK(max_abs_diff(bicubic_resize(flat, {1, 2}), Tensor(1, 3, 5, 0.7)) < 1e-14);
  std::mt19937_64 rng(4);
  const Tensor img = random_tensor({1, 9, 8}, rng);
  CHECK(max_abs_diff(bicubic_resize(img, {1, 1}), img) < 1e-15);
  CHECK_THROWS_AS(bicubic_resize(Tensor(1, 1, 1), {1, 4}), ValidationError);

  for (auto s : {ResizeScale{2, 1}, ResizeScale{1, 2}, ResizeScale{3, 2}}) {
    const auto out = bicubic_resize(img, s);
    CHECK(max_abs_diff(out, bicubic_oracle(img, out.height(), out.width())) < 1e-12);
  }

  // Cubic convolution reproduces linear functions away from the clamped border.
  Tensor ramp(1, 16, 16);
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 16; ++x) ramp.at(0, y, x) = 0.03 * x - 0.02 * y + 0.1;
  const Tensor up = bicubic_resize(ramp, {2, 1});
  double worst = 0.0;
  for (std::size_t y = 4; y < 28; ++y)
    for (std::size_t x = 4; x < 28; ++x) {
      const double sx = (x + 0.5) / 2 - 0.5, sy = (y + 0.5) / 2 - 0.5;
      worst = std::max(worst, std::abs(up.at(0, y, x) - (0.03 * sx - 0.02 * sy + 0.1)));
    }
  CHECK(worst < 1e-9);
}

TEST_CASE("super-resolution pairs") {
  const auto flat = make_sr_pair(Tensor(1, 8, 8, 0.25), 2, 2.0);
  CHECK(max_abs_diff(flat.sample.input, flat.sample.label) < 1e-14);

  const Tensor x = synthetic_image(24, 24, 5);
  const auto p = make_sr_pair(x, 2, 2.0);
  CHECK(p.task == Task::SuperResolution);
  const double db = psnr(p.sample.input, x, 1.0);
  CHECK(std::isfinite(db));
  CHECK(db < kPsnrCap);
  const Tensor chain = clamp(bicubic_oracle(bicubic_oracle(x, 12, 12), 24, 24), 0.0, 1.0);
  CHECK(max_abs_diff(p.sample.input, chain) < 1e-12);
  CHECK(max_abs_diff(add(p.sample.structure, p.sample.detail), x) <= 0x1p-53);
  CHECK_THROWS_AS(make_sr_pair(Tensor(1, 9, 8), 2, 2.0), ValidationError);
}

TEST_CASE("haze synthesis") {
  const Tensor j = synthetic_image(16, 16, 1);
  const auto clear = synthesize_haze(j, 1.0, 0.8, Tensor(1, 16, 16));
  CHECK(clear.sample.detail.min() == 1.0);
  CHECK(max_abs_diff(clear.sample.input, j) < 1e-15);

  const auto thick = synthesize_haze(j, 1.0, 0.8, Tensor(1, 16, 16, 50.0));
  CHECK(thick.sample.detail.max() == 0.05);

  const Tensor depth = synthetic_depth(16, 16, 2.0, 3);
  const auto p = synthesize_haze(j, 1.2, 0.9, depth);
  const auto& s = p.sample;
  CHECK(p.task == Task::Dehazing);
  CHECK(s.structure.min() == 0.9);
  CHECK(s.structure.max() == 0.9);
  CHECK(s.label == s.input);
  CHECK(s.clear == j);
  const Tensor recomposed = add(mul(j, s.detail), mul(s.structure, add_scalar(scale(s.detail, -1), 1)));
  CHECK(max_abs_diff(s.input, recomposed) < 1e-12);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    CHECK(s.detail[i] == doctest::Approx(std::clamp(std::exp(-1.2 * depth[i]), 0.05, 1.0)));
  }
  CHECK(s.input.min() >= 0.0);
  CHECK(s.input.max() <= 1.0);

  // Round trip where the transmission is above the floor.
  Tensor shallow = clamp(depth, 0.0, 1.5);
  const auto q = synthesize_haze(j, 1.0, 0.75, shallow);
  const Tensor back = reconstruct(FormationModel::airlight(0.1), q.sample.structure,
                                  q.sample.detail, q.sample.input);
  CHECK(max_abs_diff(back, j) < 1e-12);

  CHECK_THROWS_AS(synthesize_haze(j, 0.0, 0.8, depth), ValidationError);
  CHECK_THROWS_AS(synthesize_haze(j, 1.0, 0.5, depth), ValidationError);
  CHECK_THROWS_AS(synthesize_haze(j, 1.0, 0.8, Tensor(1, 16, 16, -1.0)), ValidationError);
}

TEST_CASE("rain synthesis") {
  const Tensor j = synthetic_image(32, 32, 7);
  RainStreaks none;
  none.count = 0;
  const auto dry = synthesize_rain(j, none, 1);
  CHECK(dry.sample.input == j);
  CHECK(dry.sample.detail.min() == 0.0);
  CHECK(dry.sample.detail.max() == 0.0);

  RainStreaks r;
  r.count = 10;
  const auto a = synthesize_rain(j, r, 42);
  CHECK(a.sample.input == synthesize_rain(j, r, 42).sample.input);
  CHECK_FALSE(a.sample.input == synthesize_rain(j, r, 43).sample.input);
  CHECK(a.sample.label == j);
  CHECK(a.sample.structure == j);
  CHECK(add(a.sample.structure, a.sample.detail) == a.sample.input);
  CHECK(a.sample.input.min() >= 0.0);
  CHECK(a.sample.input.max() <= 1.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CHECK(synthesize_rain(j, r, seed).sample.input.mean() >= j.mean());
  }
  r.intensity = 0.0;
  CHECK_THROWS_AS(synthesize_rain(j, r, 1), ValidationError);
  r.intensity = 0.6;
  CHECK_THROWS_AS(synthesize_rain(j, r, 1), ValidationError);
}

TEST_CASE("filtering pairs") {
  std::mt19937_64 rng(6);
  const Tensor in = random_tensor({1, 8, 8}, rng, 0.0, 1.0);
  const Tensor f = gaussian_smooth(in, 1.0);
  const auto p = make_filtering_pair(in, f);
  CHECK(p.sample.input == in);
  CHECK(p.sample.label == f);
  CHECK(add(p.sample.structure, p.sample.detail) == f);
  CHECK_THROWS_AS(make_filtering_pair(in, Tensor(1, 8, 7)), ValidationError);
}

TEST_CASE("patch sampler") {
  for (Task task : {Task::SuperResolution, Task::Filtering, Task::Deraining, Task::Dehazing}) {
    DatasetManifest m;
    m.task = task;
    m.synthetic_sources = 3;
    m.synthetic_size = 40;
    m.patch_size = 16;
    m.patch_count = 10;
    m.seed = 9;
    const auto pairs = sample_patches(m);
    REQUIRE(pairs.size() == 10);
    const PatchSampler sampler(m);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& s = pairs[i].sample;
      CHECK(pairs[i].task == task);
      CHECK(s.input.shape() == Shape{1, 16, 16});
      CHECK(s.label.shape() == s.input.shape());
      CHECK(s.structure.shape() == s.input.shape());
      CHECK(s.detail.shape() == s.input.shape());
      CHECK(s.input.min() >= 0.0);
      CHECK(s.input.max() <= 1.0);
      if (task == Task::Dehazing) {
        CHECK(s.clear.shape() == s.input.shape());
        CHECK(s.detail.min() >= 0.0);
        CHECK(s.detail.max() <= 1.0);
        CHECK(s.structure.min() >= 0.0);
        CHECK(s.structure.max() <= 1.0);
      } else {
        CHECK(s.detail.min() >= -1.0);
        CHECK(s.detail.max() <= 1.0);
      }
      const auto pl = sampler.placement(i);
      CHECK(pl.source < 3);
      CHECK(pl.y + 16 <= 40);
      CHECK(pl.x + 16 <= 40);
      // Order independence: each pair is a pure function of its index.
      CHECK(sampler.pair(i).sample.input == s.input);
    }
    const auto again = sample_patches(m);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      CHECK(again[i].sample.input == pairs[i].sample.input);
      CHECK(again[i].sample.detail == pairs[i].sample.detail);
    }
  }
}

TEST_CASE("manifest validation") {
  DatasetManifest m;
  m.synthetic_sources = 1;
  m.synthetic_size = 20;
  m.patch_size = 32;
  CHECK_THROWS_AS(m.validate(), ValidationError);
  m.patch_size = 16;
  m.patch_count = 0;
  CHECK_THROWS_AS(m.validate(), ValidationError);
  m.patch_count = 1;
  CHECK_NOTHROW(m.validate());
  m.synthetic_sources = 0;
  m.sources = {"/nonexistent/image.pgm"};
  CHECK_THROWS_AS(sample_patches(m), IoError);
}
