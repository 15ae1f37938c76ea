#include "mdseg/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mdseg/corpus.hpp"

namespace mdseg {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw std::invalid_argument("config: unknown key '" + where + key + "'");
}

template <typename T>
void read(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

json model_to_json(const ModelConfig& m) {
  return json{{"c", m.c},
              {"ct", m.ct},
              {"ce", m.ce},
              {"widths", m.widths},
              {"queries", m.queries},
              {"layers", m.layers},
              {"heads", m.heads},
              {"prompt_len", m.prompt_len},
              {"ffn_mult", m.ffn_mult},
              {"gn_groups", m.gn_groups},
              {"attention_order", to_string(m.attention_order)}};
}

ModelConfig model_from_json(const json& j) {
  ModelConfig m;
  reject_unknown(j,
                 {"c", "ct", "ce", "widths", "queries", "layers", "heads", "prompt_len",
                  "ffn_mult", "gn_groups", "attention_order"},
                 "model.");
  read(j, "c", m.c);
  read(j, "ct", m.ct);
  read(j, "ce", m.ce);
  read(j, "widths", m.widths);
  read(j, "queries", m.queries);
  read(j, "layers", m.layers);
  read(j, "heads", m.heads);
  read(j, "prompt_len", m.prompt_len);
  read(j, "ffn_mult", m.ffn_mult);
  read(j, "gn_groups", m.gn_groups);
  if (j.contains("attention_order"))
    m.attention_order = attention_order_from_string(j.at("attention_order").get<std::string>());
  return m;
}

json loss_to_json(const LossConfig& l) {
  return json{{"tau", l.tau},
              {"lambda_focal", l.lambda_focal},
              {"lambda_dice", l.lambda_dice},
              {"w_noobj", l.w_noobj},
              {"focal_gamma", l.focal_gamma},
              {"focal_alpha", l.focal_alpha},
              {"dice_smooth", l.dice_smooth}};
}

LossConfig loss_from_json(const json& j) {
  LossConfig l;
  reject_unknown(j,
                 {"tau", "lambda_focal", "lambda_dice", "w_noobj", "focal_gamma", "focal_alpha",
                  "dice_smooth"},
                 "loss.");
  read(j, "tau", l.tau);
  read(j, "lambda_focal", l.lambda_focal);
  read(j, "lambda_dice", l.lambda_dice);
  read(j, "w_noobj", l.w_noobj);
  read(j, "focal_gamma", l.focal_gamma);
  read(j, "focal_alpha", l.focal_alpha);
  read(j, "dice_smooth", l.dice_smooth);
  return l;
}

json optim_to_json(const OptimConfig& o) {
  return json{{"lr", o.lr},
              {"weight_decay", o.weight_decay},
              {"poly_power", o.poly_power},
              {"steps", o.steps},
              {"warmup", o.warmup},
              {"batch_size", o.batch_size},
              {"clip_norm", o.clip_norm}};
}

OptimConfig optim_from_json(const json& j) {
  OptimConfig o;
  reject_unknown(
      j, {"lr", "weight_decay", "poly_power", "steps", "warmup", "batch_size", "clip_norm"},
      "optim.");
  read(j, "lr", o.lr);
  read(j, "weight_decay", o.weight_decay);
  read(j, "poly_power", o.poly_power);
  read(j, "steps", o.steps);
  read(j, "warmup", o.warmup);
  read(j, "batch_size", o.batch_size);
  read(j, "clip_norm", o.clip_norm);
  return o;
}

json inference_to_json(const InferenceConfig& i) {
  return json{{"background_epsilon", i.background_epsilon},
              {"score_min", i.score_min},
              {"overlap_min", i.overlap_min}};
}

InferenceConfig inference_from_json(const json& j) {
  InferenceConfig i;
  reject_unknown(j, {"background_epsilon", "score_min", "overlap_min"}, "inference.");
  read(j, "background_epsilon", i.background_epsilon);
  read(j, "score_min", i.score_min);
  read(j, "overlap_min", i.overlap_min);
  return i;
}

json policy_to_json(const AugmentationPolicy& p) {
  return json{{"crop_h", p.crop_h},       {"crop_w", p.crop_w},
              {"scale_min", p.scale_min}, {"scale_max", p.scale_max},
              {"hflip_prob", p.hflip_prob}, {"color_jitter", p.color_jitter}};
}

AugmentationPolicy policy_from_json(const std::string& dataset_id, const json& j) {
  AugmentationPolicy p;
  p.dataset_id = dataset_id;
  reject_unknown(
      j, {"crop_h", "crop_w", "scale_min", "scale_max", "hflip_prob", "color_jitter"},
      "augment." + dataset_id + ".");
  read(j, "crop_h", p.crop_h);
  read(j, "crop_w", p.crop_w);
  read(j, "scale_min", p.scale_min);
  read(j, "scale_max", p.scale_max);
  read(j, "hflip_prob", p.hflip_prob);
  read(j, "color_jitter", p.color_jitter);
  return p;
}

json config_to_json_doc(const ExperimentConfig& c) {
  json aug = json::object();
  for (const auto& [id, policy] : c.augment.all()) aug[id] = policy_to_json(policy);
  return json{{"seed", c.seed},
              {"text_seed", c.text_seed},
              {"data_root", c.data_root},
              {"datasets", c.datasets},
              {"model", model_to_json(c.model)},
              {"loss", loss_to_json(c.loss)},
              {"optim", optim_to_json(c.optim)},
              {"inference", inference_to_json(c.inference)},
              {"sampling", to_string(c.sampling)},
              {"augment", aug},
              {"paths", json{{"checkpoint", c.paths.checkpoint},
                             {"log", c.paths.log},
                             {"reports", c.paths.reports}}}};
}

ExperimentConfig config_from_json_doc(const json& j) {
  ExperimentConfig c = default_config();
  reject_unknown(j,
                 {"seed", "text_seed", "data_root", "datasets", "model", "loss", "optim",
                  "inference", "sampling", "augment", "paths"},
                 "");
  read(j, "seed", c.seed);
  read(j, "text_seed", c.text_seed);
  read(j, "data_root", c.data_root);
  read(j, "datasets", c.datasets);
  if (j.contains("model")) c.model = model_from_json(j.at("model"));
  if (j.contains("loss")) c.loss = loss_from_json(j.at("loss"));
  if (j.contains("optim")) c.optim = optim_from_json(j.at("optim"));
  if (j.contains("inference")) c.inference = inference_from_json(j.at("inference"));
  if (j.contains("sampling"))
    c.sampling = sampling_mode_from_string(j.at("sampling").get<std::string>());
  if (j.contains("augment")) {
    PolicySet set;
    for (const auto& [id, pj] : j.at("augment").items()) set.add(policy_from_json(id, pj));
    c.augment = std::move(set);
  }
  if (j.contains("paths")) {
    const json& pj = j.at("paths");
    reject_unknown(pj, {"checkpoint", "log", "reports"}, "paths.");
    read(pj, "checkpoint", c.paths.checkpoint);
    read(pj, "log", c.paths.log);
    read(pj, "reports", c.paths.reports);
  }
  return c;
}

}  // namespace

void ExperimentConfig::validate() const {
  model.validate();
  loss.validate();
  optim.validate();
  inference.validate();
  if (data_root.empty()) throw std::invalid_argument("config: data_root must be set");
  for (const auto& id : datasets)
    if (id.empty()) throw std::invalid_argument("config: empty dataset id in subset");
}

PolicySet standard_policies() {
  PolicySet set;
  for (const auto& recipe : standard_corpus().datasets) set.add(recipe.policy);
  return set;
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.augment = standard_policies();
  return c;
}

std::string config_json(const ExperimentConfig& cfg) { return config_to_json_doc(cfg).dump(2); }

ExperimentConfig parse_config_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  try {
    return config_from_json_doc(j);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

std::string apply_config_overrides(const std::string& text,
                                   const std::vector<std::string>& sets) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  for (const std::string& assign : sets) {
    auto eq = assign.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::invalid_argument("override '" + assign + "' is not key.path=value");
    std::string path = assign.substr(0, eq);
    std::string raw = assign.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;  // unquoted strings pass through
    }
    json* node = &j;
    size_t start = 0;
    while (true) {
      size_t dot = path.find('.', start);
      std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
      if (key.empty()) throw std::invalid_argument("override '" + assign + "': empty key");
      if (dot == std::string::npos) {
        (*node)[key] = value;
        break;
      }
      node = &(*node)[key];
      if (!node->is_object() && !node->is_null())
        throw std::invalid_argument("override '" + assign + "': '" + key +
                                    "' is not an object");
      start = dot + 1;
    }
  }
  return j.dump(2);
}

ExperimentConfig load_config_file(const std::string& path, const std::vector<std::string>& sets) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  if (!sets.empty()) text = apply_config_overrides(text, sets);
  ExperimentConfig cfg = parse_config_json(text);
  cfg.validate();
  return cfg;
}

}  // namespace mdseg
