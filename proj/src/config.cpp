#include "dualcnn/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dualcnn/errors.hpp"

namespace dualcnn {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t default_patch_size(Task task) {
  switch (task) {
    case Task::SuperResolution: return 42;
    case Task::Filtering: return 64;
    case Task::Deraining: return 64;
    case Task::Dehazing: return 32;
  }
  return 32;
}

void RunConfig::set_seed(std::uint64_t seed) {
  train.seed = seed;
  data.seed = seed;
}

void RunConfig::validate() const {
  train.validate();
  if (pairs_dir.empty()) data.validate();
  if (data.task != train.task) throw InvariantError("data and train tasks diverged");
}

namespace {

// Object view that remembers which keys were read so leftovers can be rejected.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError("config: '" + where() + "' must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ValidationError("config: '" + child(key) + "' has the wrong type");
    }
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned()) {
      throw ValidationError("config: '" + child(key) + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ValidationError("config: '" + child(key) + "' must be a number");
    return v.get<double>();
  }

  Section sub(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, child(key));
  }

  std::vector<fs::path> paths(const std::string& key) {
    std::vector<fs::path> out;
    if (!has(key)) return out;
    const auto& v = j_.at(key);
    if (!v.is_array()) throw ValidationError("config: '" + child(key) + "' must be a list");
    for (const auto& e : v) {
      if (!e.is_string()) throw ValidationError("config: '" + child(key) + "' holds a non-path");
      out.emplace_back(e.get<std::string>());
    }
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ValidationError("config: unknown key '" + child(it.key()) + "'");
      }
    }
  }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }
  std::string child(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

BranchConfig parse_branch(Section s, BranchConfig d) {
  BranchConfig b;
  b.channels = s.count("channels", d.channels);
  b.depth = s.count("depth", d.depth);
  s.finish();
  return b;
}

json branch_json(const BranchConfig& b) { return {{"channels", b.channels}, {"depth", b.depth}}; }

std::vector<std::string> path_strings(const std::vector<fs::path>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(p.string());
  return out;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  Section top(root, "");
  if (!top.has("task")) throw ValidationError("config: 'task' is required");
  const Task task = task_from_string(top.get<std::string>("task", ""));
  const std::uint64_t seed = top.get<std::uint64_t>("seed", 0);

  {
    Section d = top.sub("data");
    auto& m = cfg.data;
    m.task = task;
    m.seed = seed;
    m.sources = d.paths("sources");
    m.targets = d.paths("targets");
    m.synthetic_sources = d.count("synthetic_sources", m.sources.empty() ? 8 : 0);
    m.synthetic_size = d.count("synthetic_size", 96);
    m.patch_size = d.count("patch_size", default_patch_size(task));
    m.patch_count = d.count("patch_count", 1000);
    m.sigma = d.number("sigma", 2.0);
    m.scale = d.count("scale", 2);
    m.filter_sigma = d.number("filter_sigma", 1.5);
    cfg.pairs_dir = d.get<std::string>("pairs_dir", "");
    {
      Section h = d.sub("haze");
      m.haze.beta_min = h.number("beta_min", m.haze.beta_min);
      m.haze.beta_max = h.number("beta_max", m.haze.beta_max);
      m.haze.airlight_min = h.number("airlight_min", m.haze.airlight_min);
      m.haze.airlight_max = h.number("airlight_max", m.haze.airlight_max);
      m.haze.depth_max = h.number("depth_max", m.haze.depth_max);
      h.finish();
    }
    {
      Section r = d.sub("rain");
      m.rain.count_min = r.count("count_min", m.rain.count_min);
      m.rain.count_max = r.count("count_max", m.rain.count_max);
      m.rain.angle_min = r.number("angle_min", m.rain.angle_min);
      m.rain.angle_max = r.number("angle_max", m.rain.angle_max);
      m.rain.length_min = r.number("length_min", m.rain.length_min);
      m.rain.length_max = r.number("length_max", m.rain.length_max);
      m.rain.intensity = r.number("intensity", m.rain.intensity);
      m.rain.width = r.number("width", m.rain.width);
      r.finish();
    }
    d.finish();
  }

  {
    Section t = top.sub("train");
    auto& c = cfg.train;
    c.task = task;
    c.seed = seed;
    c.architecture = architecture_from_string(t.get<std::string>("architecture", "dual"));
    c.iterations = t.count("iterations", 1000);
    c.batch_size = t.count("batch_size", 64);
    c.learning_rate = t.number("learning_rate", 1e-4);
    c.checkpoint_interval = t.count("checkpoint_interval", 0);
    if (t.has("gradient_clip")) c.gradient_clip = t.number("gradient_clip", 0.0);
    c.threads = t.count("threads", 1);
    c.log_elapsed = t.get<bool>("log_elapsed", false);
    c.d0 = t.number("d0", 0.1);
    {
      const LossWeights d = task_weights(task);
      Section w = t.sub("weights");
      c.weights.alpha = w.number("alpha", d.alpha);
      c.weights.lambda = w.number("lambda", d.lambda);
      c.weights.gamma = w.number("gamma", d.gamma);
      w.finish();
    }
    c.net_s = parse_branch(t.sub("net_s"), {64, 3});
    c.net_d = parse_branch(t.sub("net_d"), {64, 20});
    t.finish();
  }

  {
    Section o = top.sub("output");
    cfg.output.checkpoint = o.get<std::string>("checkpoint", cfg.output.checkpoint.string());
    cfg.output.log = o.get<std::string>("log", cfg.output.log.string());
    cfg.output.dataset = o.get<std::string>("dataset", cfg.output.dataset.string());
    o.finish();
  }
  top.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_run_config(ss.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string to_json(const RunConfig& cfg) {
  const auto& m = cfg.data;
  const auto& c = cfg.train;
  json j;
  j["task"] = to_string(c.task);
  j["seed"] = c.seed;
  j["data"] = {
      {"sources", path_strings(m.sources)},
      {"targets", path_strings(m.targets)},
      {"synthetic_sources", m.synthetic_sources},
      {"synthetic_size", m.synthetic_size},
      {"patch_size", m.patch_size},
      {"patch_count", m.patch_count},
      {"sigma", m.sigma},
      {"scale", m.scale},
      {"filter_sigma", m.filter_sigma},
      {"pairs_dir", cfg.pairs_dir.string()},
      {"haze",
       {{"beta_min", m.haze.beta_min},
        {"beta_max", m.haze.beta_max},
        {"airlight_min", m.haze.airlight_min},
        {"airlight_max", m.haze.airlight_max},
        {"depth_max", m.haze.depth_max}}},
      {"rain",
       {{"count_min", m.rain.count_min},
        {"count_max", m.rain.count_max},
        {"angle_min", m.rain.angle_min},
        {"angle_max", m.rain.angle_max},
        {"length_min", m.rain.length_min},
        {"length_max", m.rain.length_max},
        {"intensity", m.rain.intensity},
        {"width", m.rain.width}}},
  };
  j["train"] = {
      {"architecture", to_string(c.architecture)},
      {"iterations", c.iterations},
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
      {"checkpoint_interval", c.checkpoint_interval},
      {"gradient_clip", c.gradient_clip ? json(*c.gradient_clip) : json(nullptr)},
      {"threads", c.threads},
      {"log_elapsed", c.log_elapsed},
      {"d0", c.d0},
      {"weights", {{"alpha", c.weights.alpha}, {"lambda", c.weights.lambda},
                   {"gamma", c.weights.gamma}}},
      {"net_s", branch_json(c.net_s)},
      {"net_d", branch_json(c.net_d)},
  };
  j["output"] = {{"checkpoint", cfg.output.checkpoint.string()},
                 {"log", cfg.output.log.string()},
                 {"dataset", cfg.output.dataset.string()}};
  return j.dump(2) + "\n";
}

}  // namespace dualcnn
