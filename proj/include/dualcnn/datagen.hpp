#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dualcnn/formation.hpp"
#include "dualcnn/tensor.hpp"

namespace dualcnn {

/// Normalized 1-D Gaussian taps, radius ceil(3 sigma).
std::vector<double> gaussian_kernel_1d(double sigma);

/// Mirror index into [0, n) without repeating the edge sample (-1 -> 1).
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n);

/// Separable truncated Gaussian blur with reflect padding.
Tensor gaussian_smooth(const Tensor& image, double sigma);

struct StructureDetail {
  Tensor structure;
  Tensor detail;
};

/// S_gt = gaussian_smooth(X, sigma), D_gt = X - S_gt.
StructureDetail split_structure_detail(const Tensor& image, double sigma);

struct ResizeScale {
  std::size_t num = 1;
  std::size_t den = 1;
};

/// Separable Catmull-Rom (a = -0.5) resampling with pixel-centre alignment and
/// edge clamping. Output size is round(size * num / den).
Tensor bicubic_resize(const Tensor& image, ResizeScale scale);

struct PatchPair {
  Task task = Task::Filtering;
  SampleTargets sample;
};

/// Down-by-`scale` then up-by-`scale` bicubic chain as the network input.
PatchPair make_sr_pair(const Tensor& label, std::size_t scale, double sigma);

/// Clear input, externally filtered target. S_gt is the target itself, D_gt zero.
PatchPair make_filtering_pair(const Tensor& input, const Tensor& filtered);

/// Air-light haze: D_gt = clamp(exp(-beta * depth), 0.05, 1), S_gt = airlight,
/// I = J*D_gt + S_gt*(1 - D_gt). The label is I itself.
PatchPair synthesize_haze(const Tensor& clear, double beta, double airlight, const Tensor& depth);

struct RainStreaks {
  std::size_t count = 8;
  double angle_deg = 10.0;  // from vertical
  double length = 8.0;      // pixels
  double intensity = 0.3;   // peak added brightness, (0, 0.5]
  double width = 0.6;       // Gaussian profile std across the streak
};

/// Additive oriented streaks, clipped: I = clip(J + R), S_gt = X = J, D_gt = I - J.
PatchPair synthesize_rain(const Tensor& clear, const RainStreaks& streaks, std::uint64_t seed);

/// Smooth synthetic depth: a random linear ramp plus low-frequency noise in [0, depth_max].
Tensor synthetic_depth(std::size_t height, std::size_t width, double depth_max,
                       std::uint64_t seed);

/// Procedural grayscale scene in [0, 1]: shaded background, flat shapes with
/// sharp edges and fine texture. Stand-in for natural images.
Tensor synthetic_image(std::size_t height, std::size_t width, std::uint64_t seed);

struct HazeRanges {
  double beta_min = 0.5;
  double beta_max = 1.5;
  double airlight_min = 0.7;
  double airlight_max = 1.0;
  double depth_max = 2.0;

  bool operator==(const HazeRanges&) const = default;
};

struct RainRanges {
  std::size_t count_min = 4;
  std::size_t count_max = 12;
  double angle_min = -20.0;
  double angle_max = 20.0;
  double length_min = 6.0;
  double length_max = 16.0;
  double intensity = 0.3;
  double width = 0.6;

  bool operator==(const RainRanges&) const = default;
};

struct DatasetManifest {
  Task task = Task::Filtering;
  std::vector<std::filesystem::path> sources;
  /// Filtering only: externally filtered counterparts of `sources`, same order.
  std::vector<std::filesystem::path> targets;
  std::size_t synthetic_sources = 0;  // procedural images appended to `sources`
  std::size_t synthetic_size = 96;
  std::size_t patch_size = 32;
  std::size_t patch_count = 100;
  std::uint64_t seed = 0;
  double sigma = 2.0;          // structure/detail split
  std::size_t scale = 2;       // super-resolution factor
  double filter_sigma = 1.5;   // Gaussian stand-in for the edge-preserving filter
  HazeRanges haze;
  RainRanges rain;

  void validate() const;
  bool operator==(const DatasetManifest&) const = default;
};

/// Deterministic patch stream. Every pair depends only on (seed, index), so
/// pairs may be produced in any order or in parallel.
class PatchSampler {
 public:
  explicit PatchSampler(DatasetManifest manifest);

  std::size_t size() const { return manifest_.patch_count; }
  PatchPair pair(std::size_t index) const;
  std::vector<PatchPair> all() const;

  const DatasetManifest& manifest() const { return manifest_; }

  struct Placement {
    std::size_t source = 0;
    std::size_t y = 0;
    std::size_t x = 0;
  };
  /// Where patch `index` is cut from.
  Placement placement(std::size_t index) const;

 private:
  DatasetManifest manifest_;
  std::vector<Tensor> images_;
  std::vector<Tensor> filtered_;
};

std::vector<PatchPair> sample_patches(const DatasetManifest& manifest);

}  // namespace dualcnn
