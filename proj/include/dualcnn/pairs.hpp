#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dualcnn/datagen.hpp"
#include "dualcnn/metrics.hpp"
#include "dualcnn/model.hpp"

namespace dualcnn {

// On-disk pair directory:
//
//   <dir>/index.tsv            "id<TAB>task<TAB>path" header, one row per pair
//   <dir>/pair_000000/I.pgm    network input            (+ I.f64 sidecar)
//                     X.pgm    composition label        (+ X.f64)
//                     S_gt.pgm structure target         (+ S_gt.f64)
//                     D_gt.pgm detail target            (+ D_gt.f64)
//                     J.pgm    clear image, dehazing only (+ J.f64)
//
// Signed Identity-task details are shown with a +0.5 offset in the PGM only.
// Readers prefer the sidecar and fall back to the PGM.

struct NamedPair {
  std::string name;
  PatchPair pair;
};

inline constexpr double kSignedDisplayOffset = 0.5;

void write_pairs(const std::filesystem::path& dir, const std::vector<PatchPair>& pairs);

/// Throws ValidationError for a directory with no pairs, IoError for missing files.
std::vector<NamedPair> read_pairs(const std::filesystem::path& dir);

enum class EvalSource { Model, Input, Target };

/// Per-pair PSNR/SSIM against the ground truth (J for dehazing pairs, X
/// otherwise) after cropping `border` pixels. `model` is only read for
/// EvalSource::Model.
EvalReport evaluate_pairs(const std::vector<NamedPair>& pairs, const DualModel* model,
                          EvalSource source, std::size_t border);

}  // namespace dualcnn
