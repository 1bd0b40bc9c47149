#pragma once

#include <filesystem>

#include "dualcnn/tensor.hpp"

namespace dualcnn {

/// Binary PGM (P5). Pixels are mapped to [0, 1] by dividing by maxval
/// (255 for the usual 8-bit files; 16-bit files are accepted too).
Tensor read_pgm(const std::filesystem::path& path);

/// Writes channel 0 as 8-bit P5 after adding `offset` and clipping to [0, 1].
void write_pgm(const std::filesystem::path& path, const Tensor& image, double offset = 0.0);

/// Raw sidecar: three little-endian uint64 (channels, height, width) followed
/// by the data as little-endian IEEE doubles. Lossless.
void write_sidecar(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_sidecar(const std::filesystem::path& path);

/// Reads either a sidecar (".f64") or a PGM, chosen by extension.
Tensor read_image(const std::filesystem::path& path);

/// `<stem>.pgm` plus `<stem>.f64`; returns nothing, throws IoError on failure.
void write_image_pair(const std::filesystem::path& stem, const Tensor& image,
                      double display_offset = 0.0);

}  // namespace dualcnn
