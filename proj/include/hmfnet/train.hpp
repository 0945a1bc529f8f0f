#pragma once

// Training pipeline: Adam over the named parameter store, deterministic
// epoch shuffling, per-epoch loss breakdown logging, best-by-validation-F1
// checkpointing, and the ablation/sweep harnesses built on top of it.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hmfnet/config.hpp"
#include "hmfnet/data.hpp"
#include "hmfnet/loss.hpp"
#include "hmfnet/metrics.hpp"
#include "hmfnet/model.hpp"

namespace hmfnet {

class AdamOptimizer {
public:
  AdamOptimizer(double lr, double beta1, double beta2, double eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore &store, const std::map<std::string, Tensor> &grads) {
    ++t_;
    double bias1 = 1.0 - std::pow(beta1_, t_);
    double bias2 = 1.0 - std::pow(beta2_, t_);
    for (const auto &[name, grad] : grads) {
      Tensor &param = store.at(name);
      Tensor &m = moment1_.try_emplace(name, Tensor(param.shape, 0.0))
                      .first->second;
      Tensor &v = moment2_.try_emplace(name, Tensor(param.shape, 0.0))
                      .first->second;
      for (std::size_t i = 0; i < param.numel(); ++i) {
        double g = grad.data[i];
        m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * g;
        v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * g * g;
        double mhat = m.data[i] / bias1;
        double vhat = v.data[i] / bias2;
        param.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  long steps() const { return t_; }

private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, Tensor> moment1_, moment2_;
};

// Featurized dataset ready for batching.
struct PreparedData {
  std::vector<MoleculeInput> molecules;
  Tensor labels;  // N x M
  std::vector<std::string> vocab;

  std::size_t size() const { return molecules.size(); }
};

inline PreparedData prepare_dataset(const LabeledDataset &ds,
                                    const TokenVocab &vocab,
                                    std::size_t max_len) {
  PreparedData out;
  out.labels = ds.labels;
  out.vocab = ds.vocab;
  for (const auto &smiles : ds.smiles)
    out.molecules.push_back(prepare_molecule(smiles, vocab, max_len));
  return out;
}

inline GraphBatch batch_of(const PreparedData &data,
                           const std::vector<std::size_t> &indices) {
  std::vector<const MoleculeInput *> mols;
  Tensor labels({indices.size(), data.labels.cols()});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    mols.push_back(&data.molecules[indices[k]]);
    for (std::size_t j = 0; j < data.labels.cols(); ++j)
      labels.at(k, j) = data.labels.at(indices[k], j);
  }
  return make_batch(mols, &labels);
}

// Forward the whole prepared set in evaluation-sized chunks.
inline Tensor predict_probs(ParamStore &store, const ModelConfig &config,
                            const PreparedData &data,
                            std::size_t chunk = 64) {
  Tensor probs({data.size(), static_cast<std::size_t>(config.num_labels)});
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    std::size_t stop = std::min(data.size(), start + chunk);
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < stop; ++i)
      idx.push_back(i);
    Tape tape;
    Binder binder(tape, store);
    GraphBatch batch = batch_of(data, idx);
    Prediction pred = hmfnet_forward(binder, batch, config);
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (std::size_t j = 0; j < probs.cols(); ++j)
        probs.at(idx[k], j) = pred.probs.val().at(k, j);
  }
  return probs;
}

// Loss wiring for one batch. `loss_kind` follows the config surface:
// full chemically-informed loss, class-weighted BCE, or unweighted BCE.
// A model with the CIL switch ablated falls back to weighted BCE.
inline cil::LossTerms batch_loss(Var probs, const Tensor &labels,
                                 const std::string &loss_kind,
                                 const cil::ClassWeights &weights,
                                 const cil::EnergyTargets &targets,
                                 const cil::CilParams &params,
                                 bool cil_enabled) {
  std::string kind = loss_kind;
  if (!cil_enabled && kind == "cil")
    kind = "wbce";
  cil::LossTerms terms;
  if (kind == "cil") {
    return cil::total_loss(probs, labels, weights, targets, params);
  }
  Tape &tape = *probs.tape;
  if (kind == "wbce")
    terms.basis = cil::weighted_bce(probs, labels, weights.w);
  else
    terms.basis = cil::plain_bce(probs, labels);
  terms.cls = tape.leaf(Tensor::scalar(0.0));
  terms.sample = tape.leaf(Tensor::scalar(0.0));
  terms.col = tape.leaf(Tensor::scalar(0.0));
  terms.total = ops::affine(terms.basis, params.lambda[0], 0.0);
  return terms;
}

struct EpochLog {
  int epoch = 0;
  cil::LossBreakdown loss;  // batch-size weighted epoch mean
  double train_f1 = 0.0;
  double val_f1 = 0.0;
  double val_auroc = 0.0;

  std::string line() const {
    std::ostringstream os;
    os << "epoch " << epoch << std::setprecision(12)
       << " loss " << loss.total << " basis " << loss.basis << " class "
       << loss.cls << " sample " << loss.sample << " col " << loss.col
       << " train_f1 " << train_f1 << " val_f1 " << val_f1 << " val_auroc "
       << val_auroc;
    return os.str();
  }
};

struct TrainResult {
  ParamStore params;       // final weights
  ParamStore best_params;  // best validation macro-F1
  double best_val_f1 = -1.0;
  int best_epoch = -1;
  std::vector<EpochLog> log;
  ModelConfig model;
  TokenVocab vocab;
  cil::ClassWeights class_weights;
  cil::EnergyTargets energy_targets;
  int epochs_run = 0;
};

// Trains on `train`, tracking validation F1 (falls back to the training
// split when `val` is empty). Deterministic for a fixed config and seed.
inline TrainResult train_model(const LabeledDataset &train,
                               const LabeledDataset &val,
                               const RunConfig &cfg) {
  cfg.validate();
  TrainResult result;
  result.vocab = build_token_vocab(train.smiles);
  result.model = cfg.model;
  result.model.num_labels = train.num_labels();
  result.model.vocab_size = result.vocab.size();
  result.model.validate();

  PreparedData train_data = prepare_dataset(
      train, result.vocab, static_cast<std::size_t>(result.model.max_len));
  std::optional<PreparedData> val_data;
  if (val.size() > 0)
    val_data = prepare_dataset(val, result.vocab,
                               static_cast<std::size_t>(result.model.max_len));

  // Class statistics come from the full training split once, up front.
  result.class_weights = cil::class_weights(train.labels);
  result.energy_targets = cil::energy_targets(train.labels, cfg.c);
  cil::CilParams cil_params = cfg.cil_params();

  Xoshiro256 init_rng(cfg.seed);
  init_model(result.params, result.model, init_rng);
  AdamOptimizer adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);

  std::vector<std::size_t> order(train_data.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    order[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Xoshiro256 epoch_rng(cfg.seed * 0x9E3779B97F4A7C15ULL +
                         static_cast<std::uint64_t>(epoch));
    shuffle(order, epoch_rng);

    cil::LossBreakdown epoch_mean;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch)) {
      std::size_t stop = std::min(order.size(),
                                  start + static_cast<std::size_t>(cfg.batch));
      std::vector<std::size_t> idx(order.begin() + start,
                                   order.begin() + stop);
      GraphBatch batch = batch_of(train_data, idx);

      cil::ClassWeights weights = result.class_weights;
      cil::EnergyTargets targets = result.energy_targets;
      if (cfg.per_batch_weights) {
        weights = cil::class_weights(batch.labels);
        targets = cil::energy_targets(batch.labels, cfg.c);
      }

      Tape tape;
      Binder binder(tape, result.params);
      Prediction pred = hmfnet_forward(binder, batch, result.model);
      cil::LossTerms terms =
          batch_loss(pred.probs, batch.labels, cfg.loss, weights, targets,
                     cil_params, result.model.ablation.cil);
      tape.backward(terms.total);
      adam.step(result.params, binder.gradients());

      cil::LossBreakdown b = cil::breakdown(terms);
      double w = static_cast<double>(idx.size());
      epoch_mean.basis += b.basis * w;
      epoch_mean.cls += b.cls * w;
      epoch_mean.sample += b.sample * w;
      epoch_mean.col += b.col * w;
      epoch_mean.total += b.total * w;
      seen += idx.size();
    }
    if (seen > 0) {
      epoch_mean.basis /= seen;
      epoch_mean.cls /= seen;
      epoch_mean.sample /= seen;
      epoch_mean.col /= seen;
      epoch_mean.total /= seen;
    }

    EpochLog log;
    log.epoch = epoch;
    log.loss = epoch_mean;
    bool evaluate_now =
        (cfg.eval_every > 0 && epoch % cfg.eval_every == 0) ||
        epoch == cfg.epochs || cfg.early_stop_train_f1 > 0.0;
    if (evaluate_now) {
      Tensor train_probs =
          predict_probs(result.params, result.model, train_data);
      log.train_f1 = macro_f1(train_probs, train_data.labels);
      if (val_data) {
        Tensor val_probs =
            predict_probs(result.params, result.model, *val_data);
        log.val_f1 = macro_f1(val_probs, val_data->labels);
        try {
          log.val_auroc = auroc_macro(val_probs, val_data->labels);
        } catch (const NoEvaluableClasses &) {
          log.val_auroc = std::numeric_limits<double>::quiet_NaN();
        }
      } else {
        log.val_f1 = log.train_f1;
        log.val_auroc = std::numeric_limits<double>::quiet_NaN();
      }
      if (log.val_f1 > result.best_val_f1) {
        result.best_val_f1 = log.val_f1;
        result.best_epoch = epoch;
        result.best_params = result.params;
      }
    }
    result.log.push_back(log);
    result.epochs_run = epoch;
    if (cfg.early_stop_train_f1 > 0.0 &&
        log.train_f1 >= cfg.early_stop_train_f1)
      break;
  }

  if (result.best_epoch < 0) {
    // epochs == 0: ship the initial weights
    result.best_params = result.params;
    result.best_epoch = 0;
    result.best_val_f1 = 0.0;
  }
  return result;
}

// --- evaluation -------------------------------------------------------------------

struct EvalOutcome {
  EvalReport report;
  cil::LossBreakdown loss;
};

inline EvalOutcome evaluate_model(ParamStore &store, const ModelConfig &config,
                                  const TokenVocab &vocab,
                                  const LabeledDataset &ds,
                                  const RunConfig &cfg) {
  PreparedData data = prepare_dataset(
      ds, vocab, static_cast<std::size_t>(config.max_len));
  Tensor probs = predict_probs(store, config, data);
  EvalOutcome out;
  out.report = evaluate(probs, data.labels, ds.vocab);

  Tape tape;
  Var probs_var = tape.leaf(probs);
  cil::ClassWeights weights = cil::class_weights(data.labels);
  cil::EnergyTargets targets = cil::energy_targets(data.labels, cfg.c);
  cil::LossTerms terms = batch_loss(probs_var, data.labels, cfg.loss, weights,
                                    targets, cfg.cil_params(),
                                    config.ablation.cil);
  out.loss = cil::breakdown(terms);
  return out;
}

// --- ablation harness ----------------------------------------------------------------

struct AblationRow {
  bool node, edge, fingerprint, token, hmfm, cil;
  double f1 = 0.0;
  double auroc = 0.0;
};

// The eight switch patterns of the component table, in its row order.
inline std::vector<AblationRow> ablation_patterns() {
  return {
      {true, false, false, false, false, false},
      {true, true, false, false, false, false},
      {true, true, false, false, true, false},
      {true, true, false, false, true, true},
      {true, true, true, false, false, false},
      {true, true, true, true, false, false},
      {true, true, true, true, true, false},
      {true, true, true, true, true, true},
  };
}

// Runs the eight configurations with a shared seed and split; reports
// test-split macro-F1 and AUROC per row.
inline std::vector<AblationRow> run_ablation_table(const LabeledDataset &ds,
                                                   const RunConfig &base) {
  SplitResult splits = split(ds, base.fractions, base.seed);
  const LabeledDataset &eval_split =
      splits.test.size() > 0 ? splits.test : splits.train;
  std::vector<AblationRow> rows = ablation_patterns();
  for (AblationRow &row : rows) {
    RunConfig cfg = base;
    cfg.model.ablation.node = row.node;
    cfg.model.ablation.edge = row.edge;
    cfg.model.ablation.fingerprint = row.fingerprint;
    cfg.model.ablation.token = row.token;
    cfg.model.ablation.hmfm = row.hmfm;
    cfg.model.ablation.cil = row.cil;
    TrainResult tr = train_model(splits.train, splits.val, cfg);
    EvalOutcome ev = evaluate_model(tr.best_params, tr.model, tr.vocab,
                                    eval_split, cfg);
    row.f1 = ev.report.macro_f1;
    row.auroc = ev.report.auroc;
  }
  return rows;
}

inline std::string ablation_csv(const std::vector<AblationRow> &rows) {
  std::ostringstream os;
  os << "node,edge,fingerprint,token,hmfm,cil,f1,auroc\n";
  os << std::setprecision(6) << std::fixed;
  for (const auto &r : rows)
    os << (r.node ? 1 : 0) << ',' << (r.edge ? 1 : 0) << ','
       << (r.fingerprint ? 1 : 0) << ',' << (r.token ? 1 : 0) << ','
       << (r.hmfm ? 1 : 0) << ',' << (r.cil ? 1 : 0) << ',' << r.f1 << ','
       << r.auroc << "\n";
  return os.str();
}

// --- hyperparameter sweeps ----------------------------------------------------------

struct SweepRow {
  std::string setting;
  double f1 = 0.0;
  double auroc = 0.0;
};

inline std::vector<double> default_c_grid() {
  return {0.1, 0.2, 0.3, 0.4, 1.0, 10.0};
}

inline std::vector<std::array<double, 4>> default_lambda_grid() {
  return {
      {0.5, 0.2, 0.2, 0.2},
      {0.5, 0.2, 0.1, 0.2},
      {1.0, 0.2, 0.1, 0.2},
      {1.0, 0.2, 0.2, 0.2},
      {1.0, 0.3, 0.3, 0.3},
      {1.0, 0.4, 0.4, 0.4},
  };
}

inline SweepRow sweep_point(const LabeledDataset &ds, const RunConfig &cfg,
                            const std::string &setting) {
  SplitResult splits = split(ds, cfg.fractions, cfg.seed);
  const LabeledDataset &eval_split =
      splits.test.size() > 0 ? splits.test : splits.train;
  TrainResult tr = train_model(splits.train, splits.val, cfg);
  EvalOutcome ev =
      evaluate_model(tr.best_params, tr.model, tr.vocab, eval_split, cfg);
  return {setting, ev.report.macro_f1, ev.report.auroc};
}

inline std::vector<SweepRow> run_sweep(const LabeledDataset &ds,
                                       const RunConfig &base,
                                       const std::string &param,
                                       const std::vector<double> &c_grid,
                                       const std::vector<std::array<double, 4>>
                                           &lambda_grid) {
  std::vector<SweepRow> rows;
  if (param == "c") {
    for (double c : c_grid) {
      RunConfig cfg = base;
      cfg.c = c;
      std::ostringstream name;
      name << c;
      rows.push_back(sweep_point(ds, cfg, name.str()));
    }
  } else if (param == "lambda") {
    for (const auto &l : lambda_grid) {
      RunConfig cfg = base;
      cfg.lambda = l;
      std::ostringstream name;
      name << l[0] << "/" << l[1] << "/" << l[2] << "/" << l[3];
      rows.push_back(sweep_point(ds, cfg, name.str()));
    }
  } else {
    throw ConfigError("sweep parameter must be `c` or `lambda`");
  }
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow> &rows) {
  std::ostringstream os;
  os << "value,f1,auroc\n";
  os << std::setprecision(6) << std::fixed;
  for (const auto &r : rows)
    os << r.setting << ',' << r.f1 << ',' << r.auroc << "\n";
  return os.str();
}

} // namespace hmfnet
