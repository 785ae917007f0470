#include "cpgan/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace cpgan {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& v, const std::string& where) {
  try {
    std::size_t pos = 0;
    int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + where + ": \"" + v + "\" is not an integer");
  }
}

double to_double(const std::string& v, const std::string& where) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + where + ": \"" + v + "\" is not a number");
  }
}

std::uint64_t to_u64(const std::string& v, const std::string& where) {
  try {
    std::size_t pos = 0;
    unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + where + ": \"" + v + "\" is not an unsigned integer");
  }
}

bool to_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: " + where + ": \"" + v + "\" is not a boolean");
}

std::vector<int> to_int_list(const std::string& v, const std::string& where) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_int(item, where));
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string& value, const std::string& where)>;

// section -> key -> setter; this is the whole accepted schema.
const std::map<std::string, std::map<std::string, Setter>>& schema() {
  static const std::map<std::string, std::map<std::string, Setter>> kSchema = {
      {"synth",
       {
           {"identities", [](RunConfig& c, const std::string& v, const std::string& w) { c.synth.num_identities = to_int(v, w); }},
           {"views", [](RunConfig& c, const std::string& v, const std::string& w) { c.synth.views_per_domain = to_int(v, w); }},
           {"size", [](RunConfig& c, const std::string& v, const std::string& w) { c.synth.image_size = to_int(v, w); }},
           {"warp", [](RunConfig& c, const std::string& v, const std::string& w) { c.synth.warp_magnitude = to_double(v, w); }},
           {"illumination", [](RunConfig& c, const std::string& v, const std::string& w) { c.synth.illumination_jitter = to_double(v, w); }},
           {"seed", [](RunConfig& c, const std::string& v, const std::string& w) { c.synth.seed = to_u64(v, w); }},
           {"folds", [](RunConfig& c, const std::string& v, const std::string& w) { c.synth.num_folds = to_int(v, w); }},
       }},
      {"net",
       {
           {"image_size", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.net.image_size = to_int(v, w); }},
           {"channels", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.net.channels = to_int(v, w); }},
           {"embed_dim", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.net.embed_dim = to_int(v, w); }},
           {"gen_blocks_per_stage", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.net.gen_blocks_per_stage = to_int(v, w); }},
           {"perc_width", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.net.perc_width = to_int(v, w); }},
           {"disc_leaky_slope", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.net.disc_leaky_slope = to_double(v, w); }},
       }},
      {"train",
       {
           {"batch", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.batch_size = to_int(v, w); }},
           {"lr", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.learning_rate = to_double(v, w); }},
           {"beta1", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.adam_beta1 = to_double(v, w); }},
           {"beta2", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.adam_beta2 = to_double(v, w); }},
           {"epochs", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.epochs = to_int(v, w); }},
           {"steps_per_epoch", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.steps_per_epoch = to_int(v, w); }},
           {"d_steps", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.d_steps_per_g_step = to_int(v, w); }},
           {"seed", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.seed = to_u64(v, w); }},
           {"folds", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.train_folds = to_int_list(v, w); }},
           {"zero_skips", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.zero_skips = to_bool(v, w); }},
           {"checkpoint_every", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.checkpoint_every = to_int(v, w); }},
           {"keep_epoch_checkpoints", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.keep_epoch_checkpoints = to_bool(v, w); }},
           {"device", [](RunConfig& c, const std::string& v, const std::string&) { c.train.device = v; }},
       }},
      {"loss",
       {
           {"margin", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.weights.margin = to_double(v, w); }},
           {"lambda1", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.weights.lambda_gan = to_double(v, w); }},
           {"lambda2", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.weights.lambda_perceptual = to_double(v, w); }},
           {"lambda3", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.weights.lambda_l2 = to_double(v, w); }},
       }},
      {"adda",
       {
           {"stage1_lr", [](RunConfig& c, const std::string& v, const std::string& w) { c.adda.stage1_lr = to_double(v, w); }},
           {"stage2_lr", [](RunConfig& c, const std::string& v, const std::string& w) { c.adda.stage2_lr = to_double(v, w); }},
           {"stage1_epochs", [](RunConfig& c, const std::string& v, const std::string& w) { c.adda.stage1_epochs = to_int(v, w); }},
           {"stage2_epochs", [](RunConfig& c, const std::string& v, const std::string& w) { c.adda.stage2_epochs = to_int(v, w); }},
           {"contrastive_weight", [](RunConfig& c, const std::string& v, const std::string& w) { c.adda.contrastive_weight = to_double(v, w); }},
       }},
      {"eval",
       {
           {"folds", [](RunConfig& c, const std::string& v, const std::string& w) { c.eval_folds = to_int_list(v, w); }},
           {"batch", [](RunConfig& c, const std::string& v, const std::string& w) { c.eval_batch = to_int(v, w); }},
       }},
      {"run",
       {
           {"model", [](RunConfig& c, const std::string& v, const std::string&) { c.model = v; }},
           {"stage", [](RunConfig& c, const std::string& v, const std::string&) { c.stage = v; }},
           {"manifest", [](RunConfig& c, const std::string& v, const std::string&) { c.manifest_path = v; }},
           {"out", [](RunConfig& c, const std::string& v, const std::string&) { c.out_dir = v; }},
           {"checkpoint", [](RunConfig& c, const std::string& v, const std::string&) { c.checkpoint_path = v; }},
           {"ablation", [](RunConfig& c, const std::string& v, const std::string&) { c.ablation_variant = v; }},
       }},
  };
  return kSchema;
}

}  // namespace

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("config: cannot open file " + path);
  std::string line, section;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    // Inline comments are stripped everywhere; values may not contain '#' or ';'.
    const auto hash = line.find_first_of("#;");
    std::string t = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::invalid_argument("config: " + path + ":" + std::to_string(lineno) +
                                    ": malformed section header " + t);
      section = trim(t.substr(1, t.size() - 2));
      if (!schema().count(section))
        throw std::invalid_argument("config: " + path + ":" + std::to_string(lineno) +
                                    ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: " + path + ":" + std::to_string(lineno) +
                                  ": expected key = value, got \"" + t + "\"");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (section.empty())
      throw std::invalid_argument("config: " + path + ":" + std::to_string(lineno) + ": key \"" + key +
                                  "\" appears before any [section] header");
    const auto& keys = schema().at(section);
    const auto it = keys.find(key);
    if (it == keys.end())
      throw std::invalid_argument("config: " + path + ":" + std::to_string(lineno) + ": unknown key \"" +
                                  key + "\" in section [" + section + "]");
    it->second(cfg, value, "[" + section + "] " + key);
  }
}

void apply_env_overrides(RunConfig& cfg) {
  if (const char* seed = std::getenv("CPGAN_SEED")) {
    const std::uint64_t s = to_u64(seed, "CPGAN_SEED");
    cfg.synth.seed = s;
    cfg.train.seed = s;
    cfg.adda.seed = s;
  }
  if (const char* out = std::getenv("CPGAN_OUT")) cfg.out_dir = out;
}

void RunConfig::sync_shared() {
  adda.net = train.net;
  adda.batch_size = train.batch_size;
  adda.adam_beta1 = train.adam_beta1;
  adda.adam_beta2 = train.adam_beta2;
  adda.margin = train.weights.margin;
  adda.seed = train.seed;
  adda.train_folds = train.train_folds;
  if (train.steps_per_epoch > 0) adda.steps_per_epoch = train.steps_per_epoch;
}

nlohmann::json RunConfig::echo() const {
  nlohmann::json jtrain, jadda;
  to_json(jtrain, train);
  to_json(jadda, adda);
  return {{"model", model},
          {"stage", stage},
          {"manifest", manifest_path},
          {"out", out_dir},
          {"checkpoint", checkpoint_path},
          {"direction", direction},
          {"ablation", ablation_variant},
          {"eval_folds", eval_folds},
          {"eval_batch", eval_batch},
          {"synth",
           {{"identities", synth.num_identities},
            {"views", synth.views_per_domain},
            {"size", synth.image_size},
            {"warp", synth.warp_magnitude},
            {"illumination", synth.illumination_jitter},
            {"seed", synth.seed},
            {"folds", synth.num_folds}}},
          {"train", jtrain},
          {"adda", jadda}};
}

}  // namespace cpgan
