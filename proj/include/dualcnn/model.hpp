#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "dualcnn/formation.hpp"
#include "dualcnn/network.hpp"

namespace dualcnn {

/// Dual: both branches read the input. Cascade: Net-D reads Net-S's output.
enum class Architecture { Dual, Cascade };

std::string to_string(Architecture arch);
Architecture architecture_from_string(const std::string& name);

/// A trained (or freshly initialized) structure/detail network pair plus the
/// metadata needed to run it.
struct DualModel {
  Architecture architecture = Architecture::Dual;
  Task task = Task::Filtering;
  FormationModel formation;
  NetworkSpec net_s;
  NetworkSpec net_d;
  Parameters params_s;
  Parameters params_d;
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;

  void validate() const;
  /// (largest kernel - 1) / 2 over both branches.
  std::size_t border() const;

  bool operator==(const DualModel&) const = default;
};

/// He-initialized model. Net-D takes one input channel in either architecture.
DualModel make_model(Architecture arch, Task task, const FormationModel& formation,
                     NetworkSpec net_s, NetworkSpec net_d, std::uint64_t seed);

// Checkpoint layout: a text header
//
//   dualcnn-checkpoint 1
//   architecture <dual|cascade>
//   task <name>
//   formation <identity|airlight>
//   d0 <float>
//   seed <n>
//   iteration <n>
//   branch <name> <kind> <input_channels> <layer_count>
//   layer <out_channels> <kernel_size> <relu|none>     (one per layer)
//   ...second branch...
//   end
//
// followed, per branch and per layer, by a little-endian uint64 count and that
// many little-endian doubles: weights in (out, in, ky, kx) order, then biases.

void write_checkpoint(std::ostream& out, const DualModel& model);
DualModel read_checkpoint(std::istream& in, const std::string& origin = "<stream>");

void save_checkpoint(const std::filesystem::path& path, const DualModel& model);
DualModel load_checkpoint(const std::filesystem::path& path);

}  // namespace dualcnn
