#include "wtcvae/config.hpp"

#include <json.hpp>

namespace wtcvae {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw Error("config: '" + key + "' " + what);
}

std::size_t size_field(const json& v, const std::string& key) {
  if (!v.is_number_unsigned()) bad(key, "must be a non-negative integer");
  return v.get<std::size_t>();
}

std::uint64_t u64_field(const json& v, const std::string& key) {
  if (!v.is_number_unsigned()) bad(key, "must be a non-negative integer");
  return v.get<std::uint64_t>();
}

double real_field(const json& v, const std::string& key) {
  if (!v.is_number()) bad(key, "must be a number");
  return v.get<double>();
}

std::vector<std::size_t> sizes_field(const json& v, const std::string& key) {
  if (!v.is_array()) bad(key, "must be an array of integers");
  std::vector<std::size_t> out;
  for (const json& e : v) out.push_back(size_field(e, key));
  return out;
}

std::string path_field(const json& v, const std::string& key) {
  if (!v.is_string()) bad(key, "must be a string path");
  return v.get<std::string>();
}

void apply_model(const json& m, ModelConfig& model) {
  if (!m.is_object()) bad("model", "must be an object");
  for (const auto& [k, v] : m.items()) {
    const std::string key = "model." + k;
    if (k == "latent_dim") model.latent_dim = size_field(v, key);
    else if (k == "kernel_size") model.kernel_size = size_field(v, key);
    else if (k == "encoder_channels") model.encoder_channels = sizes_field(v, key);
    else if (k == "encoder_strides") model.encoder_strides = sizes_field(v, key);
    else if (k == "decoder_channels") model.decoder_channels = sizes_field(v, key);
    else if (k == "upsample_factors") model.upsample_factors = sizes_field(v, key);
    else bad(key, "is not a known field");
  }
}

}  // namespace

std::string dump_train_config(const TrainConfig& c) {
  json j;
  j["config_version"] = kConfigVersion;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["beta_min"] = c.schedule.beta_min;
  j["beta_max"] = c.schedule.beta_max;
  j["beta_warmup_epochs"] = c.schedule.warmup_epochs;
  j["lr"] = c.adam.lr;
  j["adam_beta1"] = c.adam.beta1;
  j["adam_beta2"] = c.adam.beta2;
  j["adam_eps"] = c.adam.eps;
  j["model"] = {{"latent_dim", c.model.latent_dim},
                {"kernel_size", c.model.kernel_size},
                {"encoder_channels", c.model.encoder_channels},
                {"encoder_strides", c.model.encoder_strides},
                {"decoder_channels", c.model.decoder_channels},
                {"upsample_factors", c.model.upsample_factors}};
  j["train_subset"] = c.train_subset;
  j["val_every"] = c.val_every;
  j["checkpoint_every"] = c.checkpoint_every;
  j["dataset"] = c.dataset.string();
  j["checkpoint"] = c.checkpoint.string();
  j["metrics"] = c.metrics.string();
  return j.dump(2);
}

TrainConfig parse_train_config(const std::string& text, TrainConfig c) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error("config: malformed JSON");
  if (!j.is_object()) throw Error("config: top level must be an object");
  if (j.contains("config_version")) {
    const json& v = j["config_version"];
    if (!v.is_number_integer() || v.get<int>() != kConfigVersion) {
      throw Error("config: unsupported config_version " + v.dump() + " (expected " + std::to_string(kConfigVersion) + ")");
    }
  }
  if (j.contains("desk_scale")) {
    if (!j["desk_scale"].is_boolean()) bad("desk_scale", "must be true or false");
    if (j["desk_scale"].get<bool>()) c.apply_desk_scale();
  }
  for (const auto& [k, v] : j.items()) {
    if (k == "config_version" || k == "desk_scale") continue;
    if (k == "batch_size") c.batch_size = size_field(v, k);
    else if (k == "epochs") c.epochs = size_field(v, k);
    else if (k == "seed") c.seed = u64_field(v, k);
    else if (k == "beta_min") c.schedule.beta_min = real_field(v, k);
    else if (k == "beta_max") c.schedule.beta_max = real_field(v, k);
    else if (k == "beta_warmup_epochs") c.schedule.warmup_epochs = real_field(v, k);
    else if (k == "lr") c.adam.lr = real_field(v, k);
    else if (k == "adam_beta1") c.adam.beta1 = real_field(v, k);
    else if (k == "adam_beta2") c.adam.beta2 = real_field(v, k);
    else if (k == "adam_eps") c.adam.eps = real_field(v, k);
    else if (k == "model") apply_model(v, c.model);
    else if (k == "train_subset") c.train_subset = size_field(v, k);
    else if (k == "val_every") c.val_every = size_field(v, k);
    else if (k == "checkpoint_every") c.checkpoint_every = size_field(v, k);
    else if (k == "dataset") c.dataset = path_field(v, k);
    else if (k == "checkpoint") c.checkpoint = path_field(v, k);
    else if (k == "metrics") c.metrics = path_field(v, k);
    else bad(k, "is not a known field");
  }
  return c;
}

}  // namespace wtcvae
