#include "dualcnn/pairs.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dualcnn/errors.hpp"
#include "dualcnn/image_io.hpp"
#include "dualcnn/trainer.hpp"

namespace dualcnn {

namespace fs = std::filesystem;

namespace {

std::string pair_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "pair_%06zu", i);
  return buf;
}

Tensor load_component(const fs::path& dir, const std::string& stem, bool required,
                      double display_offset = 0.0) {
  const fs::path raw = dir / (stem + ".f64");
  const fs::path pgm = dir / (stem + ".pgm");
  if (fs::exists(raw)) return read_sidecar(raw);
  if (fs::exists(pgm)) return add_scalar(read_pgm(pgm), -display_offset);
  if (required) throw IoError("pair '" + dir.string() + "' is missing " + stem);
  return {};
}

}  // namespace

void write_pairs(const fs::path& dir, const std::vector<PatchPair>& pairs) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  std::ostringstream index;
  index << "id\ttask\tpath\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const std::string name = pair_name(i);
    const fs::path sub = dir / name;
    fs::create_directories(sub, ec);
    if (ec) throw IoError("cannot create '" + sub.string() + "': " + ec.message());
    const bool signed_detail = p.task != Task::Dehazing;
    write_image_pair(sub / "I", p.sample.input);
    write_image_pair(sub / "X", p.sample.label);
    write_image_pair(sub / "S_gt", p.sample.structure);
    write_image_pair(sub / "D_gt", p.sample.detail, signed_detail ? kSignedDisplayOffset : 0.0);
    if (!p.sample.clear.empty()) write_image_pair(sub / "J", p.sample.clear);
    index << i << "\t" << to_string(p.task) << "\t" << name << "\n";
  }
  const fs::path index_path = dir / "index.tsv";
  std::ofstream out(index_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + index_path.string() + "'");
  out << index.str();
  if (!out) throw IoError("error writing '" + index_path.string() + "'");
}

std::vector<NamedPair> read_pairs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("pairs directory '" + dir.string() + "' not found");

  struct Entry {
    std::string name;
    Task task;
    fs::path path;
  };
  std::vector<Entry> entries;
  const fs::path index_path = dir / "index.tsv";
  if (fs::exists(index_path)) {
    std::ifstream in(index_path);
    if (!in) throw IoError("cannot read '" + index_path.string() + "'");
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream fields(line);
      std::string id, task, rel;
      if (!std::getline(fields, id, '\t') || !std::getline(fields, task, '\t') ||
          !std::getline(fields, rel)) {
        throw FormatError("malformed row in '" + index_path.string() + "': " + line);
      }
      entries.push_back({rel, task_from_string(task), dir / rel});
    }
  } else {
    // No index: any subdirectory holding an input image, task inferred from J.
    std::vector<fs::path> subs;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_directory() &&
          (fs::exists(e.path() / "I.f64") || fs::exists(e.path() / "I.pgm"))) {
        subs.push_back(e.path());
      }
    }
    std::sort(subs.begin(), subs.end());
    for (const auto& s : subs) {
      const bool hazy = fs::exists(s / "J.f64") || fs::exists(s / "J.pgm");
      entries.push_back({s.filename().string(), hazy ? Task::Dehazing : Task::Filtering, s});
    }
  }
  if (entries.empty()) throw ValidationError("no pairs found in '" + dir.string() + "'");

  std::vector<NamedPair> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    NamedPair np;
    np.name = e.name;
    np.pair.task = e.task;
    auto& s = np.pair.sample;
    s.input = load_component(e.path, "I", true);
    s.label = load_component(e.path, "X", true);
    s.structure = load_component(e.path, "S_gt", false);
    s.detail = load_component(e.path, "D_gt", false,
                              e.task == Task::Dehazing ? 0.0 : kSignedDisplayOffset);
    s.clear = load_component(e.path, "J", e.task == Task::Dehazing);
    if (s.structure.empty()) s.structure = s.label;
    if (s.detail.empty()) s.detail = Tensor(s.label.shape());
    out.push_back(std::move(np));
  }
  return out;
}

EvalReport evaluate_pairs(const std::vector<NamedPair>& pairs, const DualModel* model,
                          EvalSource source, std::size_t border) {
  if (pairs.empty()) throw ValidationError("nothing to evaluate");
  if (source == EvalSource::Model && model == nullptr) {
    throw ValidationError("model evaluation needs a checkpoint");
  }
  EvalReport report;
  for (const auto& np : pairs) {
    const auto& s = np.pair.sample;
    const bool hazy = np.pair.task == Task::Dehazing;
    const Tensor& truth = hazy ? s.clear : s.label;
    Tensor prediction;
    switch (source) {
      case EvalSource::Model:
        prediction = infer(*model, s.input, formation_for(np.pair.task, model->formation.d0)).output;
        break;
      case EvalSource::Input: prediction = s.input; break;
      case EvalSource::Target: prediction = truth; break;
    }
    const Tensor out = crop_border(prediction, border);
    const Tensor ref = crop_border(truth, border);
    report.add({np.name, psnr(out, ref, 1.0), ssim(out, ref)});
  }
  report.finalize();
  return report;
}

}  // namespace dualcnn
