#include "drloc/experiment/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "drloc/numcore/errors.hpp"
#include "json.hpp"

namespace drloc::exp {
namespace {

using json = nlohmann::ordered_json;

// Reads one section, tracking which keys were consumed so leftovers can be
// reported as typos.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      } else {
        if (!it->is_string()) throw ConfigError("");
      }
      out = it->get<T>();
    } catch (const std::exception&) {
      throw ConfigError(where() + "." + key + ": wrong type (" + it->type_name() + ")");
    }
  }

  Section child(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    const auto it = j_.find(key);
    return Section(it == j_.end() ? empty : *it, path_.empty() ? key : path_ + "." + key);
  }

  const json* raw(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string where() const { return path_.empty() ? "config" : path_; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(where() + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds must be non-empty");
  run.validate();
}

train::RunSpec ExperimentConfig::cell(std::uint64_t seed,
                                      const std::filesystem::path& out_dir) const {
  auto spec = run;
  spec.seed = seed;
  spec.out_dir = out_dir;
  return spec;
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  auto& r = c.run;
  Section top(root, "");

  if (const auto* seeds = top.raw("seeds")) {
    if (!seeds->is_array()) throw ConfigError("seeds must be an array");
    c.seeds.clear();
    for (const auto& s : *seeds) {
      if (!s.is_number_unsigned()) throw ConfigError("seeds must be non-negative integers");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  std::string out = c.output_dir.string();
  top.get("output_dir", out);
  c.output_dir = out;

  auto model = top.child("model");
  model.get("image_side", r.model.image_side);
  model.get("patch_side", r.model.patch_side);
  model.get("embed_dim", r.model.embed_dim);
  model.get("blocks", r.model.blocks);
  model.get("heads", r.model.heads);
  model.get("mlp_ratio", r.model.mlp_ratio);
  model.get("classes", r.model.classes);
  model.get("use_abs_pos_embed", r.model.use_abs_pos_embed);
  model.get("pool_final_grid", r.model.pool_final_grid);
  model.finish();

  auto loss = top.child("loss");
  std::string variant = loc::to_string(r.loss.variant);
  loss.get("variant", variant);
  r.loss.variant = loc::parse_variant(variant);
  loss.get("m", r.loss.m);
  loss.get("lambda", r.loss.lambda);
  loss.get("alpha", r.loss.alpha);
  loss.get("sigma_floor", r.loss.sigma_floor);
  loss.get("enabled", r.aux_enabled);
  loss.get("head_hidden", r.head_hidden);
  loss.get("head_weight_decay", r.head_weight_decay);
  loss.finish();

  auto optim = top.child("optim");
  optim.get("base_lr", r.optim.base_lr);
  optim.get("weight_decay", r.optim.weight_decay);
  optim.get("beta1", r.optim.beta1);
  optim.get("beta2", r.optim.beta2);
  optim.get("eps", r.optim.eps);
  optim.get("warmup_epochs", r.optim.warmup_epochs);
  optim.get("total_epochs", r.optim.total_epochs);
  optim.get("batch_size", r.optim.batch_size);
  optim.get("grad_clip", r.optim.grad_clip);
  optim.finish();

  auto dataset = top.child("dataset");
  std::string kind = data::to_string(r.dataset.kind);
  dataset.get("kind", kind);
  r.dataset.kind = data::parse_dataset_kind(kind);
  dataset.get("path", r.dataset.path);
  dataset.get("seed", r.dataset.seed);
  dataset.get("train_limit", r.dataset.train_limit);
  dataset.get("test_limit", r.dataset.test_limit);
  auto synthetic = dataset.child("synthetic");
  synthetic.get("classes", r.dataset.synthetic.classes);
  synthetic.get("samples_train", r.dataset.synthetic.samples_train);
  synthetic.get("samples_test", r.dataset.synthetic.samples_test);
  synthetic.get("noise_sigma", r.dataset.synthetic.noise_sigma);
  synthetic.finish();
  dataset.finish();
  r.dataset.synthetic.image_side = r.model.image_side;

  auto training = top.child("training");
  training.get("eval_interval", r.eval_interval);
  training.get("checkpoint_every", r.checkpoint_every);
  training.get("log_timing", r.log_timing);
  training.get("log_grad_norms", r.log_grad_norms);
  training.finish();

  top.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot read config file " + file.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  const auto& r = c.run;
  json root;
  root["seeds"] = c.seeds;
  root["output_dir"] = c.output_dir.string();
  root["model"] = {{"image_side", r.model.image_side},
                   {"patch_side", r.model.patch_side},
                   {"embed_dim", r.model.embed_dim},
                   {"blocks", r.model.blocks},
                   {"heads", r.model.heads},
                   {"mlp_ratio", r.model.mlp_ratio},
                   {"classes", r.model.classes},
                   {"use_abs_pos_embed", r.model.use_abs_pos_embed},
                   {"pool_final_grid", r.model.pool_final_grid}};
  root["loss"] = {{"variant", loc::to_string(r.loss.variant)},
                  {"m", r.loss.m},
                  {"lambda", r.loss.lambda},
                  {"alpha", r.loss.alpha},
                  {"sigma_floor", r.loss.sigma_floor},
                  {"enabled", r.aux_enabled},
                  {"head_hidden", r.head_hidden},
                  {"head_weight_decay", r.head_weight_decay}};
  root["optim"] = {{"base_lr", r.optim.base_lr},
                   {"weight_decay", r.optim.weight_decay},
                   {"beta1", r.optim.beta1},
                   {"beta2", r.optim.beta2},
                   {"eps", r.optim.eps},
                   {"warmup_epochs", r.optim.warmup_epochs},
                   {"total_epochs", r.optim.total_epochs},
                   {"batch_size", r.optim.batch_size},
                   {"grad_clip", r.optim.grad_clip}};
  root["dataset"] = {{"kind", data::to_string(r.dataset.kind)},
                     {"path", r.dataset.path},
                     {"seed", r.dataset.seed},
                     {"train_limit", r.dataset.train_limit},
                     {"test_limit", r.dataset.test_limit},
                     {"synthetic",
                      {{"classes", r.dataset.synthetic.classes},
                       {"samples_train", r.dataset.synthetic.samples_train},
                       {"samples_test", r.dataset.synthetic.samples_test},
                       {"noise_sigma", r.dataset.synthetic.noise_sigma}}}};
  root["training"] = {{"eval_interval", r.eval_interval},
                      {"checkpoint_every", r.checkpoint_every},
                      {"log_timing", r.log_timing},
                      {"log_grad_norms", r.log_grad_norms}};
  return root.dump(2) + "\n";
}

}  // namespace drloc::exp
