#include "dualcnn/datagen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "dualcnn/errors.hpp"
#include "dualcnn/image_io.hpp"

namespace dualcnn {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Independent stream per (seed, index, purpose).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t salt) {
  return splitmix64(splitmix64(seed ^ splitmix64(salt)) + index);
}

constexpr std::uint64_t kSaltPlacement = 1;
constexpr std::uint64_t kSaltTask = 2;
constexpr std::uint64_t kSaltDepth = 3;
constexpr std::uint64_t kSaltRain = 4;
constexpr std::uint64_t kSaltSynthetic = 5;

double catmull_rom(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

struct Taps {
  std::array<std::size_t, 4> index;
  std::array<double, 4> weight;
};

std::vector<Taps> resample_taps(std::size_t in_size, std::size_t out_size, double ratio) {
  // ratio = in/out; maps output pixel centres onto the input grid.
  std::vector<Taps> taps(out_size);
  const auto last = static_cast<std::ptrdiff_t>(in_size) - 1;
  for (std::size_t o = 0; o < out_size; ++o) {
    const double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    const double base = std::floor(src);
    const double frac = src - base;
    for (int k = 0; k < 4; ++k) {
      const auto i = static_cast<std::ptrdiff_t>(base) - 1 + k;
      taps[o].index[k] = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, last));
      taps[o].weight[k] = catmull_rom(frac - (k - 1));
    }
  }
  return taps;
}

}  // namespace

std::vector<double> gaussian_kernel_1d(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ValidationError("gaussian sigma must be positive, got " + std::to_string(sigma));
  }
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : k) v /= total;
  return k;
}

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

Tensor gaussian_smooth(const Tensor& image, double sigma) {
  const auto k = gaussian_kernel_1d(sigma);
  const auto r = static_cast<std::ptrdiff_t>(k.size() / 2);
  const std::size_t H = image.height();
  const std::size_t W = image.width();

  Tensor rows(image.shape());
  Tensor out(image.shape());
  for (std::size_t c = 0; c < image.channels(); ++c) {
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        // Summing offsets from the centre keeps flat regions exactly flat.
        const double centre = image.at(c, y, x);
        double acc = 0.0;
        for (std::ptrdiff_t t = -r; t <= r; ++t) {
          acc += k[static_cast<std::size_t>(t + r)] *
                 (image.at(c, y, reflect_index(static_cast<std::ptrdiff_t>(x) + t, W)) - centre);
        }
        rows.at(c, y, x) = centre + acc;
      }
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const double centre = rows.at(c, y, x);
        double acc = 0.0;
        for (std::ptrdiff_t t = -r; t <= r; ++t) {
          acc += k[static_cast<std::size_t>(t + r)] *
                 (rows.at(c, reflect_index(static_cast<std::ptrdiff_t>(y) + t, H), x) - centre);
        }
        out.at(c, y, x) = centre + acc;
      }
  }
  return out;
}

StructureDetail split_structure_detail(const Tensor& image, double sigma) {
  StructureDetail sd;
  sd.structure = gaussian_smooth(image, sigma);
  sd.detail = sub(image, sd.structure);
  return sd;
}

Tensor bicubic_resize(const Tensor& image, ResizeScale scale) {
  if (scale.num == 0 || scale.den == 0) throw ValidationError("resize scale must be positive");
  const double factor = static_cast<double>(scale.num) / static_cast<double>(scale.den);
  const auto out_h = static_cast<std::size_t>(std::llround(image.height() * factor));
  const auto out_w = static_cast<std::size_t>(std::llround(image.width() * factor));
  if (out_h == 0 || out_w == 0) {
    throw ValidationError("bicubic_resize: target size for " + image.shape().to_string() +
                          " at scale " + std::to_string(scale.num) + "/" +
                          std::to_string(scale.den) + " is degenerate");
  }
  const auto tx = resample_taps(image.width(), out_w, static_cast<double>(image.width()) / out_w);
  const auto ty =
      resample_taps(image.height(), out_h, static_cast<double>(image.height()) / out_h);

  Tensor horiz(image.channels(), image.height(), out_w);
  for (std::size_t c = 0; c < image.channels(); ++c)
    for (std::size_t y = 0; y < image.height(); ++y)
      for (std::size_t x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += tx[x].weight[k] * image.at(c, y, tx[x].index[k]);
        horiz.at(c, y, x) = acc;
      }
  Tensor out(image.channels(), out_h, out_w);
  for (std::size_t c = 0; c < image.channels(); ++c)
    for (std::size_t y = 0; y < out_h; ++y)
      for (std::size_t x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += ty[y].weight[k] * horiz.at(c, ty[y].index[k], x);
        out.at(c, y, x) = acc;
      }
  return out;
}

PatchPair make_sr_pair(const Tensor& label, std::size_t scale, double sigma) {
  if (scale == 0) throw ValidationError("super-resolution scale must be positive");
  if (label.height() % scale != 0 || label.width() % scale != 0) {
    throw ValidationError("patch " + label.shape().to_string() +
                          " is not divisible by scale " + std::to_string(scale));
  }
  PatchPair p;
  p.task = Task::SuperResolution;
  const Tensor low = bicubic_resize(label, {1, scale});
  p.sample.input = clamp(bicubic_resize(low, {scale, 1}), 0.0, 1.0);
  auto sd = split_structure_detail(label, sigma);
  p.sample.label = label;
  p.sample.structure = std::move(sd.structure);
  p.sample.detail = std::move(sd.detail);
  return p;
}

PatchPair make_filtering_pair(const Tensor& input, const Tensor& filtered) {
  require_same_shape(input, filtered, "filtering pair");
  PatchPair p;
  p.task = Task::Filtering;
  p.sample.input = input;
  p.sample.label = filtered;
  p.sample.structure = filtered;
  p.sample.detail = Tensor(filtered.shape());
  return p;
}

PatchPair synthesize_haze(const Tensor& clear, double beta, double airlight, const Tensor& depth) {
  require_same_shape(clear, depth, "haze depth map");
  if (!(beta > 0.0)) throw ValidationError("haze beta must be positive");
  if (!(airlight >= 0.7 && airlight <= 1.0)) {
    throw ValidationError("airlight must lie in [0.7, 1.0], got " + std::to_string(airlight));
  }
  if (depth.min() < 0.0) throw ValidationError("depth values must be non-negative");

  PatchPair p;
  p.task = Task::Dehazing;
  Tensor transmission(depth.shape());
  for (std::size_t i = 0; i < depth.size(); ++i) {
    transmission[i] = std::clamp(std::exp(-beta * depth[i]), 0.05, 1.0);
  }
  Tensor atmosphere(clear.shape(), airlight);
  Tensor hazy(clear.shape());
  for (std::size_t i = 0; i < hazy.size(); ++i) {
    hazy[i] = clear[i] * transmission[i] + atmosphere[i] * (1.0 - transmission[i]);
  }
  p.sample.input = hazy;
  p.sample.label = std::move(hazy);
  p.sample.structure = std::move(atmosphere);
  p.sample.detail = std::move(transmission);
  p.sample.clear = clear;
  return p;
}

PatchPair synthesize_rain(const Tensor& clear, const RainStreaks& streaks, std::uint64_t seed) {
  if (!(streaks.intensity > 0.0 && streaks.intensity <= 0.5)) {
    throw ValidationError("rain intensity must lie in (0, 0.5], got " +
                          std::to_string(streaks.intensity));
  }
  if (!(streaks.width > 0.0) || streaks.length < 0.0) {
    throw ValidationError("rain streak width must be positive and length non-negative");
  }
  const std::size_t H = clear.height();
  const std::size_t W = clear.width();
  Tensor rain(1, H, W);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double theta = streaks.angle_deg * std::numbers::pi / 180.0;
  const double ux = std::sin(theta);
  const double uy = std::cos(theta);
  const double reach = 3.0 * streaks.width;

  for (std::size_t s = 0; s < streaks.count; ++s) {
    const double cx = unit(rng) * static_cast<double>(W);
    const double cy = unit(rng) * static_cast<double>(H);
    const double half = 0.5 * streaks.length * (0.7 + 0.6 * unit(rng));
    const double amp = streaks.intensity * (0.5 + 0.5 * unit(rng));
    const double ax = cx - half * ux, ay = cy - half * uy;
    const double bx = cx + half * ux, by = cy + half * uy;
    const auto x_lo = static_cast<std::ptrdiff_t>(std::floor(std::min(ax, bx) - reach));
    const auto x_hi = static_cast<std::ptrdiff_t>(std::ceil(std::max(ax, bx) + reach));
    const auto y_lo = static_cast<std::ptrdiff_t>(std::floor(std::min(ay, by) - reach));
    const auto y_hi = static_cast<std::ptrdiff_t>(std::ceil(std::max(ay, by) + reach));
    for (std::ptrdiff_t y = std::max<std::ptrdiff_t>(0, y_lo);
         y <= std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(H) - 1, y_hi); ++y) {
      for (std::ptrdiff_t x = std::max<std::ptrdiff_t>(0, x_lo);
           x <= std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(W) - 1, x_hi); ++x) {
        // Distance from the pixel centre to the segment.
        const double px = x + 0.5 - ax;
        const double py = y + 0.5 - ay;
        const double t = std::clamp(px * ux + py * uy, 0.0, 2.0 * half);
        const double dx = px - t * ux;
        const double dy = py - t * uy;
        const double d2 = dx * dx + dy * dy;
        rain.at(0, y, x) += amp * std::exp(-d2 / (2.0 * streaks.width * streaks.width));
      }
    }
  }

  PatchPair p;
  p.task = Task::Deraining;
  Tensor rainy(clear.shape());
  for (std::size_t c = 0; c < clear.channels(); ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        rainy.at(c, y, x) = std::clamp(clear.at(c, y, x) + rain.at(0, y, x), 0.0, 1.0);
  p.sample.input = rainy;
  p.sample.label = clear;
  p.sample.structure = clear;
  p.sample.detail = sub(rainy, clear);
  return p;
}

Tensor synthetic_depth(std::size_t height, std::size_t width, double depth_max,
                       std::uint64_t seed) {
  if (!(depth_max > 0.0)) throw ValidationError("depth_max must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double angle = 2.0 * std::numbers::pi * unit(rng);
  const double ca = std::cos(angle), sa = std::sin(angle);
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::array<Wave, 3> waves;
  for (auto& w : waves) {
    w = {(unit(rng) - 0.5) * 2.0, (unit(rng) - 0.5) * 2.0, 2.0 * std::numbers::pi * unit(rng),
         0.05 + 0.1 * unit(rng)};
  }
  Tensor depth(1, height, width);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const double u = (static_cast<double>(x) + 0.5) / static_cast<double>(width);
      const double v = (static_cast<double>(y) + 0.5) / static_cast<double>(height);
      // Ramp over [0, 1] whatever the direction.
      double t = 0.5 + 0.5 * ((u - 0.5) * ca + (v - 0.5) * sa) * std::numbers::sqrt2;
      for (const auto& w : waves) {
        t += w.amp * std::sin(2.0 * std::numbers::pi * (w.fx * u + w.fy * v) + w.phase);
      }
      depth.at(0, y, x) = depth_max * std::clamp(t, 0.0, 1.0);
    }
  return depth;
}

Tensor synthetic_image(std::size_t height, std::size_t width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double H = static_cast<double>(height);
  const double W = static_cast<double>(width);
  Tensor img(1, height, width);

  const double base = 0.3 + 0.4 * unit(rng);
  const double gx = (unit(rng) - 0.5) * 0.4;
  const double gy = (unit(rng) - 0.5) * 0.4;
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      img.at(0, y, x) = base + gx * (x / W - 0.5) + gy * (y / H - 0.5);

  const int shapes = 6 + static_cast<int>(unit(rng) * 6.0);
  for (int s = 0; s < shapes; ++s) {
    const bool ellipse = unit(rng) < 0.5;
    const double cx = unit(rng) * W, cy = unit(rng) * H;
    const double rx = (0.08 + 0.2 * unit(rng)) * W, ry = (0.08 + 0.2 * unit(rng)) * H;
    const double level = unit(rng);
    const bool textured = unit(rng) < 0.5;
    const double period = 3.0 + 4.0 * unit(rng);
    const double tex_amp = 0.04 + 0.08 * unit(rng);
    const double tex_angle = std::numbers::pi * unit(rng);
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        const double dx = (x + 0.5 - cx) / rx;
        const double dy = (y + 0.5 - cy) / ry;
        const bool inside = ellipse ? dx * dx + dy * dy <= 1.0
                                    : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (!inside) continue;
        double v = level;
        if (textured) {
          const double phase = (x * std::cos(tex_angle) + y * std::sin(tex_angle)) / period;
          v += tex_amp * std::sin(2.0 * std::numbers::pi * phase);
        }
        img.at(0, y, x) = v;
      }
  }
  std::normal_distribution<double> grain(0.0, 0.01);
  for (double& v : img.data()) v = std::clamp(v + grain(rng), 0.0, 1.0);
  return img;
}

// ---------------------------------------------------------------------------

void DatasetManifest::validate() const {
  if (patch_size == 0) throw ValidationError("patch_size must be positive");
  if (patch_count == 0) throw ValidationError("patch_count must be >= 1");
  if (sources.empty() && synthetic_sources == 0) {
    throw ValidationError("dataset needs source images or synthetic_sources > 0");
  }
  if (synthetic_sources > 0 && synthetic_size < patch_size) {
    throw ValidationError("synthetic_size must be >= patch_size");
  }
  if (!(sigma > 0.0)) throw ValidationError("sigma must be positive");
  if (task == Task::SuperResolution) {
    if (scale < 1) throw ValidationError("scale must be >= 1");
    if (patch_size % scale != 0) {
      throw ValidationError("patch_size " + std::to_string(patch_size) +
                            " is not divisible by scale " + std::to_string(scale));
    }
  }
  if (task == Task::Filtering) {
    if (!targets.empty() && targets.size() != sources.size()) {
      throw ValidationError("filtering targets must pair one-to-one with sources");
    }
    if (!targets.empty() && synthetic_sources > 0) {
      throw ValidationError("filtering targets cannot be combined with synthetic sources");
    }
    if (!(filter_sigma > 0.0)) throw ValidationError("filter_sigma must be positive");
  }
  if (task == Task::Dehazing) {
    if (!(haze.beta_min > 0.0 && haze.beta_min <= haze.beta_max)) {
      throw ValidationError("haze beta range must satisfy 0 < beta_min <= beta_max");
    }
    if (!(haze.airlight_min >= 0.7 && haze.airlight_min <= haze.airlight_max &&
          haze.airlight_max <= 1.0)) {
      throw ValidationError("haze airlight range must lie within [0.7, 1.0]");
    }
    if (!(haze.depth_max > 0.0)) throw ValidationError("haze depth_max must be positive");
  }
  if (task == Task::Deraining) {
    if (rain.count_min > rain.count_max) throw ValidationError("rain count range is inverted");
    if (rain.angle_min > rain.angle_max) throw ValidationError("rain angle range is inverted");
    if (!(rain.length_min >= 0.0 && rain.length_min <= rain.length_max)) {
      throw ValidationError("rain length range is invalid");
    }
    if (!(rain.intensity > 0.0 && rain.intensity <= 0.5)) {
      throw ValidationError("rain intensity must lie in (0, 0.5]");
    }
    if (!(rain.width > 0.0)) throw ValidationError("rain width must be positive");
  }
}

PatchSampler::PatchSampler(DatasetManifest manifest) : manifest_(std::move(manifest)) {
  manifest_.validate();
  for (const auto& path : manifest_.sources) images_.push_back(read_image(path));
  for (const auto& path : manifest_.targets) filtered_.push_back(read_image(path));
  for (std::size_t i = 0; i < manifest_.synthetic_sources; ++i) {
    images_.push_back(synthetic_image(manifest_.synthetic_size, manifest_.synthetic_size,
                                      derive_seed(manifest_.seed, i, kSaltSynthetic)));
  }
  for (std::size_t i = 0; i < images_.size(); ++i) {
    const auto& img = images_[i];
    const std::string name =
        i < manifest_.sources.size() ? manifest_.sources[i].string() : "synthetic source";
    if (img.channels() != 1) throw ValidationError("'" + name + "' is not single-channel");
    if (img.height() < manifest_.patch_size || img.width() < manifest_.patch_size) {
      throw ValidationError("'" + name + "' (" + img.shape().to_string() +
                            ") is smaller than patch_size " +
                            std::to_string(manifest_.patch_size));
    }
    if (i < filtered_.size() && filtered_[i].shape() != img.shape()) {
      throw ValidationError("filtered target for '" + name + "' has a different size");
    }
  }
}

PatchSampler::Placement PatchSampler::placement(std::size_t index) const {
  std::mt19937_64 rng(derive_seed(manifest_.seed, index, kSaltPlacement));
  Placement p;
  p.source = std::uniform_int_distribution<std::size_t>(0, images_.size() - 1)(rng);
  const auto& img = images_[p.source];
  p.y = std::uniform_int_distribution<std::size_t>(0, img.height() - manifest_.patch_size)(rng);
  p.x = std::uniform_int_distribution<std::size_t>(0, img.width() - manifest_.patch_size)(rng);
  return p;
}

PatchPair PatchSampler::pair(std::size_t index) const {
  const auto at = placement(index);
  const std::size_t n = manifest_.patch_size;
  const Tensor patch = images_[at.source].crop(at.y, at.x, n, n);
  std::mt19937_64 rng(derive_seed(manifest_.seed, index, kSaltTask));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  switch (manifest_.task) {
    case Task::SuperResolution:
      return make_sr_pair(patch, manifest_.scale, manifest_.sigma);
    case Task::Filtering: {
      const Tensor target = filtered_.empty()
                                ? gaussian_smooth(patch, manifest_.filter_sigma)
                                : filtered_[at.source].crop(at.y, at.x, n, n);
      return make_filtering_pair(patch, target);
    }
    case Task::Deraining: {
      const auto& r = manifest_.rain;
      RainStreaks s;
      s.count = std::uniform_int_distribution<std::size_t>(r.count_min, r.count_max)(rng);
      s.angle_deg = between(r.angle_min, r.angle_max);
      s.length = between(r.length_min, r.length_max);
      s.intensity = r.intensity;
      s.width = r.width;
      return synthesize_rain(patch, s, derive_seed(manifest_.seed, index, kSaltRain));
    }
    case Task::Dehazing: {
      const auto& h = manifest_.haze;
      const double beta = between(h.beta_min, h.beta_max);
      const double airlight = between(h.airlight_min, h.airlight_max);
      const Tensor depth =
          synthetic_depth(n, n, h.depth_max, derive_seed(manifest_.seed, index, kSaltDepth));
      return synthesize_haze(patch, beta, airlight, depth);
    }
  }
  throw InvariantError("unhandled task in patch sampler");
}

std::vector<PatchPair> PatchSampler::all() const {
  std::vector<PatchPair> pairs;
  pairs.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) pairs.push_back(pair(i));
  return pairs;
}

std::vector<PatchPair> sample_patches(const DatasetManifest& manifest) {
  return PatchSampler(manifest).all();
}

}  // namespace dualcnn
