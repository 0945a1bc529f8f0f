#pragma once

// Run configuration: JSON documents validated against the schema shipped in
// docs/run_config.schema.json. The HMFNET_SEED environment variable
// overrides the configured seed.

#include <array>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "hmfnet/loss.hpp"
#include "hmfnet/model.hpp"

namespace hmfnet {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // data
  std::string data_path;  // empty selects the synthetic dataset
  int synthetic_molecules = 128;
  int synthetic_labels = 8;
  std::array<double, 3> fractions{0.8, 0.1, 0.1};

  // optimizer and schedule
  std::uint64_t seed = 7;
  int epochs = 100;
  int batch = 32;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  // loss surface
  std::string loss = "cil";  // cil | wbce | bce
  std::string class_mode = "corrected";  // corrected | literal
  double c = 0.2;
  double e1 = 0.5;
  double e2 = 0.5;
  std::array<double, 4> lambda{1.0, 0.2, 0.1, 0.2};
  bool per_batch_weights = false;

  // model
  ModelConfig model;

  // run control
  std::string out_dir = "runs";
  double early_stop_train_f1 = 0.0;  // 0 disables early stopping
  int eval_every = 1;

  cil::CilParams cil_params() const {
    cil::CilParams p;
    p.c = c;
    p.e1 = e1;
    p.e2 = e2;
    p.lambda = lambda;
    p.mode = cil::class_mode_from_string(class_mode);
    return p;
  }

  void validate() const {
    if (std::fabs(e1 + e2 - 1.0) > 1e-9)
      throw ConfigError("e1 + e2 must equal 1");
    for (double l : lambda)
      if (l < 0)
        throw ConfigError("lambda weights must be nonnegative");
    double fsum = fractions[0] + fractions[1] + fractions[2];
    if (std::fabs(fsum - 1.0) > 1e-9)
      throw ConfigError("split fractions must sum to 1");
    if (epochs < 0)
      throw ConfigError("epochs must be >= 0");
    if (batch < 1)
      throw ConfigError("batch must be >= 1");
    if (lr <= 0 || adam_eps <= 0)
      throw ConfigError("learning rate and adam epsilon must be positive");
    if (c < 0)
      throw ConfigError("c must be >= 0");
    if (loss != "cil" && loss != "wbce" && loss != "bce")
      throw ConfigError("loss must be one of cil, wbce, bce");
    if (class_mode != "corrected" && class_mode != "literal")
      throw ConfigError("class_mode must be corrected or literal");
    if (model.hmfm_sigma <= 0)
      throw ConfigError("hmfm sigma must be positive");
    if (synthetic_molecules < 2 || synthetic_labels < 2)
      throw ConfigError("synthetic dataset needs >= 2 molecules and labels");
  }
};

namespace config_detail {

template <typename T>
void fetch(const nlohmann::json &j, const char *key, T &out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception &e) {
      throw ConfigError(std::string("bad value for `") + key + "`: " +
                        e.what());
    }
  }
}

inline void reject_unknown(const nlohmann::json &j,
                           std::initializer_list<const char *> known,
                           const std::string &scope) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char *k : known)
      if (it.key() == k)
        ok = true;
    if (!ok)
      throw ConfigError("unknown key `" + it.key() + "` in " + scope);
  }
}

} // namespace config_detail

inline RunConfig run_config_from_json(const nlohmann::json &j) {
  using config_detail::fetch;
  RunConfig cfg;
  config_detail::reject_unknown(
      j,
      {"data", "synthetic_molecules", "synthetic_labels", "fractions", "seed",
       "epochs", "batch", "lr", "beta1", "beta2", "adam_eps", "loss",
       "class_mode", "c", "e1", "e2", "lambda", "per_batch_weights", "model",
       "out_dir", "early_stop_train_f1", "eval_every"},
      "run config");
  fetch(j, "data", cfg.data_path);
  fetch(j, "synthetic_molecules", cfg.synthetic_molecules);
  fetch(j, "synthetic_labels", cfg.synthetic_labels);
  fetch(j, "fractions", cfg.fractions);
  fetch(j, "seed", cfg.seed);
  fetch(j, "epochs", cfg.epochs);
  fetch(j, "batch", cfg.batch);
  fetch(j, "lr", cfg.lr);
  fetch(j, "beta1", cfg.beta1);
  fetch(j, "beta2", cfg.beta2);
  fetch(j, "adam_eps", cfg.adam_eps);
  fetch(j, "loss", cfg.loss);
  fetch(j, "class_mode", cfg.class_mode);
  fetch(j, "c", cfg.c);
  fetch(j, "e1", cfg.e1);
  fetch(j, "e2", cfg.e2);
  fetch(j, "lambda", cfg.lambda);
  fetch(j, "per_batch_weights", cfg.per_batch_weights);
  fetch(j, "out_dir", cfg.out_dir);
  fetch(j, "early_stop_train_f1", cfg.early_stop_train_f1);
  fetch(j, "eval_every", cfg.eval_every);

  if (j.contains("model")) {
    const auto &m = j.at("model");
    config_detail::reject_unknown(
        m,
        {"hidden", "gat_layers", "gat_heads", "mlp_hidden", "embed",
         "max_len", "tok_dim", "tok_heads", "tok_ffn", "hmfm_sigma",
         "ablation"},
        "model config");
    fetch(m, "hidden", cfg.model.hidden);
    fetch(m, "gat_layers", cfg.model.gat_layers);
    fetch(m, "gat_heads", cfg.model.gat_heads);
    fetch(m, "mlp_hidden", cfg.model.mlp_hidden);
    fetch(m, "embed", cfg.model.embed);
    fetch(m, "max_len", cfg.model.max_len);
    fetch(m, "tok_dim", cfg.model.tok_dim);
    fetch(m, "tok_heads", cfg.model.tok_heads);
    fetch(m, "tok_ffn", cfg.model.tok_ffn);
    fetch(m, "hmfm_sigma", cfg.model.hmfm_sigma);
    if (m.contains("ablation")) {
      const auto &a = m.at("ablation");
      config_detail::reject_unknown(
          a, {"node", "edge", "fingerprint", "token", "hmfm", "cil", "lmfe"},
          "ablation flags");
      fetch(a, "node", cfg.model.ablation.node);
      fetch(a, "edge", cfg.model.ablation.edge);
      fetch(a, "fingerprint", cfg.model.ablation.fingerprint);
      fetch(a, "token", cfg.model.ablation.token);
      fetch(a, "hmfm", cfg.model.ablation.hmfm);
      fetch(a, "cil", cfg.model.ablation.cil);
      fetch(a, "lmfe", cfg.model.ablation.lmfe);
    }
  }

  const char *env_seed = std::getenv("HMFNET_SEED");
  if (env_seed && *env_seed)
    cfg.seed = std::strtoull(env_seed, nullptr, 10);

  cfg.validate();
  return cfg;
}

inline RunConfig load_run_config(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return run_config_from_json(j);
}

inline nlohmann::json run_config_to_json(const RunConfig &cfg) {
  nlohmann::json j;
  j["data"] = cfg.data_path;
  j["synthetic_molecules"] = cfg.synthetic_molecules;
  j["synthetic_labels"] = cfg.synthetic_labels;
  j["fractions"] = cfg.fractions;
  j["seed"] = cfg.seed;
  j["epochs"] = cfg.epochs;
  j["batch"] = cfg.batch;
  j["lr"] = cfg.lr;
  j["beta1"] = cfg.beta1;
  j["beta2"] = cfg.beta2;
  j["adam_eps"] = cfg.adam_eps;
  j["loss"] = cfg.loss;
  j["class_mode"] = cfg.class_mode;
  j["c"] = cfg.c;
  j["e1"] = cfg.e1;
  j["e2"] = cfg.e2;
  j["lambda"] = cfg.lambda;
  j["per_batch_weights"] = cfg.per_batch_weights;
  j["out_dir"] = cfg.out_dir;
  j["early_stop_train_f1"] = cfg.early_stop_train_f1;
  j["eval_every"] = cfg.eval_every;
  j["model"] = {
      {"hidden", cfg.model.hidden},
      {"gat_layers", cfg.model.gat_layers},
      {"gat_heads", cfg.model.gat_heads},
      {"mlp_hidden", cfg.model.mlp_hidden},
      {"embed", cfg.model.embed},
      {"max_len", cfg.model.max_len},
      {"tok_dim", cfg.model.tok_dim},
      {"tok_heads", cfg.model.tok_heads},
      {"tok_ffn", cfg.model.tok_ffn},
      {"hmfm_sigma", cfg.model.hmfm_sigma},
      {"ablation",
       {{"node", cfg.model.ablation.node},
        {"edge", cfg.model.ablation.edge},
        {"fingerprint", cfg.model.ablation.fingerprint},
        {"token", cfg.model.ablation.token},
        {"hmfm", cfg.model.ablation.hmfm},
        {"cil", cfg.model.ablation.cil},
        {"lmfe", cfg.model.ablation.lmfe}}},
  };
  return j;
}

} // namespace hmfnet
