#include "tide/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <set>
#include <sstream>

#include "tide/error.hpp"

namespace tide {

namespace pt = boost::property_tree;

namespace {

template <typename V>
V convert(const std::string& section, const std::string& key, const std::string& raw) {
  std::istringstream in(raw);
  V v{};
  in >> v;
  if (in.fail() || !(in >> std::ws).eof())
    throw Error(ErrorCode::BadParams, "[" + section + "] " + key + ": cannot parse '" + raw + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  if (raw == "true" || raw == "1" || raw == "yes" || raw == "on") return true;
  if (raw == "false" || raw == "0" || raw == "no" || raw == "off") return false;
  throw Error(ErrorCode::BadParams, key + ": expected a boolean, got '" + raw + "'");
}

// Binds config keys of one section to fields.
class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  template <typename V>
  Section& num(const std::string& key, V& field) {
    known_.insert(key);
    if (auto raw = get(key)) field = convert<V>(name_, key, *raw);
    return *this;
  }
  Section& text(const std::string& key, std::string& field) {
    known_.insert(key);
    if (auto raw = get(key)) field = *raw;
    return *this;
  }
  void finish() const {
    if (!tree_) return;
    for (const auto& [k, v] : *tree_)
      if (!known_.count(k)) throw Error(ErrorCode::BadParams, "unknown key [" + name_ + "] " + k);
  }

 private:
  std::optional<std::string> get(const std::string& key) const {
    if (!tree_) return std::nullopt;
    auto it = tree_->find(key);
    if (it == tree_->not_found()) return std::nullopt;
    return it->second.data();
  }

  const pt::ptree* tree_;
  std::string name_;
  std::set<std::string> known_;
};

const std::set<std::string> kTrainKeys{"lr",        "weight_decay", "epochs", "batch",     "cycle_epochs",
                                       "clip_norm", "lr_min",       "seed",   "max_steps", "deterministic"};

}  // namespace

TrainConfig RunConfig::train_config(Phase phase) const {
  TrainConfig c = phase == Phase::Base     ? TrainConfig::base_defaults()
                  : phase == Phase::Refine ? TrainConfig::refine_defaults()
                                           : TrainConfig::combined_defaults();
  c.model = model;
  c.loss_weights = loss;
  for (const auto& [k, v] : train) {
    if (k == "lr") c.lr = convert<double>("train", k, v);
    else if (k == "weight_decay") c.weight_decay = convert<double>("train", k, v);
    else if (k == "epochs") c.epochs = convert<int>("train", k, v);
    else if (k == "batch") c.batch = convert<int>("train", k, v);
    else if (k == "cycle_epochs") c.cycle_epochs = convert<int>("train", k, v);
    else if (k == "clip_norm") c.clip_norm = convert<double>("train", k, v);
    else if (k == "lr_min") c.lr_min = convert<double>("train", k, v);
    else if (k == "seed") c.seed = convert<std::uint64_t>("train", k, v);
    else if (k == "max_steps") c.max_steps = convert<long>("train", k, v);
    else if (k == "deterministic") c.deterministic = parse_bool(k, v);
  }
  return c;
}

RunConfig parse_config(const std::string& text) {
  pt::ptree root;
  std::istringstream in(text);
  try {
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::BadParams, std::string("config syntax: ") + e.what());
  }
  static const std::set<std::string> sections{"model", "train", "loss", "data", "simulate"};
  for (const auto& [name, sub] : root) {
    if (!sections.count(name)) throw Error(ErrorCode::BadParams, "unknown config section [" + name + "]");
    if (sub.empty() && !sub.data().empty())
      throw Error(ErrorCode::BadParams, "key '" + name + "' outside of a section");
  }
  auto section = [&](const char* name) -> const pt::ptree* {
    auto it = root.find(name);
    return it == root.not_found() ? nullptr : &it->second;
  };

  RunConfig c;
  {
    const pt::ptree* m = section("model");
    std::string preset = "toy";
    if (m) {
      auto it = m->find("preset");
      if (it != m->not_found()) preset = it->second.data();
    }
    if (preset == "full") c.model = ModelConfig::full();
    else if (preset != "toy") throw Error(ErrorCode::BadParams, "[model] preset must be toy or full");
    Section(m, "model")
        .text("preset", preset)
        .num("n_down", c.model.n_down)
        .num("base_channels", c.model.base_channels)
        .num("max_channels", c.model.max_channels)
        .num("deg_base_channels", c.model.deg_base_channels)
        .num("bottleneck_blocks", c.model.bottleneck_blocks)
        .num("detail_blocks", c.model.detail_blocks)
        .num("negative_slope", c.model.negative_slope)
        .num("fusion_hidden", c.model.fusion_hidden)
        .num("residual_base_channels", c.model.residual_base_channels)
        .num("refine_channels", c.model.refine_channels)
        .num("gate_hidden", c.model.gate_hidden)
        .num("refine_fusion_hidden", c.model.refine_fusion_hidden)
        .finish();
    c.model.validate();
  }
  if (const pt::ptree* t = section("train")) {
    for (const auto& [k, v] : *t) {
      if (!kTrainKeys.count(k)) throw Error(ErrorCode::BadParams, "unknown key [train] " + k);
      c.train[k] = v.data();
    }
    (void)c.train_config(Phase::Base);  // surfaces value errors now
  }
  Section(section("loss"), "loss")
      .num("l1", c.loss.l1)
      .num("ssim", c.loss.ssim)
      .num("perceptual", c.loss.perceptual)
      .num("diversity", c.loss.diversity)
      .num("consistency", c.loss.consistency)
      .num("aux", c.loss.aux)
      .num("magnitude", c.loss.magnitude)
      .num("improve", c.loss.improve)
      .num("base_combined", c.loss.base_combined)
      .num("refine_combined", c.loss.refine_combined)
      .num("epsilon", c.loss.epsilon)
      .finish();
  {
    std::string input, target, output;
    Section(section("data"), "data").text("input", input).text("target", target).text("output", output).finish();
    c.input = input;
    c.target = target;
    c.output = output;
  }
  {
    auto& s = c.simulate;
    std::string depth = "linear";
    Section(section("simulate"), "simulate")
        .num("beta_r", s.beta[0])
        .num("beta_g", s.beta[1])
        .num("beta_b", s.beta[2])
        .text("depth", depth)
        .num("depth_perturbation", s.depth_perturbation)
        .num("ambient_r", s.ambient[0])
        .num("ambient_g", s.ambient[1])
        .num("ambient_b", s.ambient[2])
        .num("scatter", s.scatter)
        .num("blur_sigma_min", s.blur_sigma_min)
        .num("blur_sigma_max", s.blur_sigma_max)
        .num("noise_std", s.noise_std)
        .num("snow_density", s.snow_density)
        .num("seed", s.seed)
        .finish();
    if (depth == "smooth") s.depth = sim::DepthField::Smooth;
    else if (depth != "linear") throw Error(ErrorCode::BadParams, "[simulate] depth must be linear or smooth");
    s.validate();
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::IOFailure, "cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

}  // namespace tide
