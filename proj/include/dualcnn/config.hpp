#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "dualcnn/datagen.hpp"
#include "dualcnn/trainer.hpp"

namespace dualcnn {

struct OutputPaths {
  std::filesystem::path checkpoint = "model.ckpt";
  std::filesystem::path log = "train.log";
  std::filesystem::path dataset = "pairs";

  bool operator==(const OutputPaths&) const = default;
};

/// Everything a CLI run needs: dataset manifest, training config, outputs.
/// Parsed from JSON; unknown keys are rejected and every default is
/// materialized so that serializing the result documents the whole run.
struct RunConfig {
  TrainConfig train;
  DatasetManifest data;
  std::filesystem::path pairs_dir;  // train from an existing pairs directory instead
  OutputPaths output;

  /// --seed override: reseeds both the data stream and the initialization.
  void set_seed(std::uint64_t seed);
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string to_json(const RunConfig& config);

/// Default patch edge per task (41x41 is not divisible by the x2 scale, so SR uses 42).
std::size_t default_patch_size(Task task);

}  // namespace dualcnn
