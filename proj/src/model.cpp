#include "dualcnn/model.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "dualcnn/errors.hpp"

namespace dualcnn {

namespace fs = std::filesystem;

std::string to_string(Architecture arch) {
  return arch == Architecture::Cascade ? "cascade" : "dual";
}

Architecture architecture_from_string(const std::string& name) {
  if (name == "dual") return Architecture::Dual;
  if (name == "cascade") return Architecture::Cascade;
  throw ValidationError("unknown architecture '" + name + "' (expected dual or cascade)");
}

void DualModel::validate() const {
  formation.validate();
  check_parameters(net_s, params_s);
  check_parameters(net_d, params_d);
  if (net_s.output_channels() != 1 || net_d.output_channels() != 1) {
    throw ValidationError("both branches must emit a single channel");
  }
  if (architecture == Architecture::Cascade && net_d.input_channels != net_s.output_channels()) {
    throw ValidationError("cascade Net-D must consume Net-S's output channels");
  }
}

std::size_t DualModel::border() const {
  return (std::max(net_s.max_kernel_size(), net_d.max_kernel_size()) - 1) / 2;
}

DualModel make_model(Architecture arch, Task task, const FormationModel& formation,
                     NetworkSpec net_s, NetworkSpec net_d, std::uint64_t seed) {
  DualModel m;
  m.architecture = arch;
  m.task = task;
  m.formation = formation;
  m.net_s = std::move(net_s);
  m.net_d = std::move(net_d);
  m.params_s = init_parameters(m.net_s, seed);
  // Offset the second stream so identical specs do not start identical.
  m.params_d = init_parameters(m.net_d, seed ^ 0x5bd1e9955bd1e995ull);
  m.seed = seed;
  m.validate();
  return m;
}

namespace {

const char* activation_name(Activation a) { return a == Activation::ReLU ? "relu" : "none"; }

void write_branch_header(std::ostream& out, const char* name, const NetworkSpec& spec) {
  out << "branch " << name << " " << to_string(spec.kind) << " " << spec.input_channels << " "
      << spec.layers.size() << "\n";
  for (const auto& l : spec.layers) {
    out << "layer " << l.out_channels << " " << l.kernel_size << " "
        << activation_name(l.activation) << "\n";
  }
}

void write_block(std::ostream& out, std::span<const double> w, std::span<const double> b) {
  const std::uint64_t count = w.size() + b.size();
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  out.write(reinterpret_cast<const char*>(w.data()),
            static_cast<std::streamsize>(w.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size() * sizeof(double)));
}

class HeaderReader {
 public:
  HeaderReader(std::istream& in, std::string origin) : in_(in), origin_(std::move(origin)) {}

  std::istringstream line(const std::string& keyword) {
    std::string text;
    if (!std::getline(in_, text)) fail("unexpected end of header, wanted '" + keyword + "'");
    std::istringstream fields(text);
    std::string key;
    fields >> key;
    if (key != keyword) fail("expected '" + keyword + "', found '" + text + "'");
    return fields;
  }

  template <class T>
  T value(const std::string& keyword) {
    auto fields = line(keyword);
    T v{};
    if (!(fields >> v)) fail("bad value for '" + keyword + "'");
    return v;
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw FormatError("corrupt checkpoint '" + origin_ + "': " + why);
  }

 private:
  std::istream& in_;
  std::string origin_;
};

NetworkSpec read_branch_header(HeaderReader& r, const std::string& expected_name) {
  auto fields = r.line("branch");
  std::string name, kind;
  std::size_t input_channels = 0, count = 0;
  if (!(fields >> name >> kind >> input_channels >> count) || name != expected_name) {
    r.fail("bad branch header for " + expected_name);
  }
  if (count == 0 || count > 4096) r.fail("implausible layer count");
  NetworkSpec spec;
  try {
    spec.kind = net_kind_from_string(kind);
  } catch (const ValidationError&) {
    r.fail("unknown network kind '" + kind + "'");
  }
  spec.input_channels = input_channels;
  for (std::size_t i = 0; i < count; ++i) {
    auto lf = r.line("layer");
    LayerSpec l;
    std::string act;
    if (!(lf >> l.out_channels >> l.kernel_size >> act)) r.fail("bad layer line");
    if (act == "relu") {
      l.activation = Activation::ReLU;
    } else if (act == "none") {
      l.activation = Activation::None;
    } else {
      r.fail("unknown activation '" + act + "'");
    }
    spec.layers.push_back(l);
  }
  try {
    spec.validate();
  } catch (const ValidationError& e) {
    r.fail(e.what());
  }
  return spec;
}

Parameters read_blocks(std::istream& in, const NetworkSpec& spec, const HeaderReader& r) {
  Parameters p = zero_parameters(spec);
  for (auto& k : p.layers) {
    std::uint64_t count = 0;
    if (!in.read(reinterpret_cast<char*>(&count), sizeof count)) r.fail("truncated layer block");
    if (count != k.parameter_count()) r.fail("layer block length does not match its spec");
    in.read(reinterpret_cast<char*>(k.weights().data()),
            static_cast<std::streamsize>(k.weights().size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(k.bias().data()),
            static_cast<std::streamsize>(k.bias().size() * sizeof(double)));
    if (!in) r.fail("truncated layer block");
  }
  return p;
}

}  // namespace

void write_checkpoint(std::ostream& out, const DualModel& model) {
  model.validate();
  char d0[64];
  std::snprintf(d0, sizeof d0, "%.17g", model.formation.d0);
  out << "dualcnn-checkpoint 1\n"
      << "architecture " << to_string(model.architecture) << "\n"
      << "task " << to_string(model.task) << "\n"
      << "formation "
      << (model.formation.kind == FormationKind::AirLight ? "airlight" : "identity") << "\n"
      << "d0 " << d0 << "\n"
      << "seed " << model.seed << "\n"
      << "iteration " << model.iteration << "\n";
  write_branch_header(out, "net_s", model.net_s);
  write_branch_header(out, "net_d", model.net_d);
  out << "end\n";
  for (const auto* params : {&model.params_s, &model.params_d}) {
    for (const auto& k : params->layers) write_block(out, k.weights(), k.bias());
  }
}

DualModel read_checkpoint(std::istream& in, const std::string& origin) {
  HeaderReader r(in, origin);
  {
    auto magic = r.line("dualcnn-checkpoint");
    int version = 0;
    if (!(magic >> version) || version != 1) r.fail("unsupported checkpoint version");
  }
  DualModel m;
  try {
    m.architecture = architecture_from_string(r.value<std::string>("architecture"));
    m.task = task_from_string(r.value<std::string>("task"));
    const auto formation = r.value<std::string>("formation");
    if (formation == "identity") {
      m.formation.kind = FormationKind::Identity;
    } else if (formation == "airlight") {
      m.formation.kind = FormationKind::AirLight;
    } else {
      r.fail("unknown formation '" + formation + "'");
    }
    m.formation.d0 = r.value<double>("d0");
    m.seed = r.value<std::uint64_t>("seed");
    m.iteration = r.value<std::uint64_t>("iteration");
    m.net_s = read_branch_header(r, "net_s");
    m.net_d = read_branch_header(r, "net_d");
    r.line("end");
    m.params_s = read_blocks(in, m.net_s, r);
    m.params_d = read_blocks(in, m.net_d, r);
    if (in.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes after last block");
    m.validate();
  } catch (const ValidationError& e) {
    r.fail(e.what());
  }
  return m;
}

void save_checkpoint(const fs::path& path, const DualModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_checkpoint(out, model);
  out.flush();
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

DualModel load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in, path.string());
}

}  // namespace dualcnn
