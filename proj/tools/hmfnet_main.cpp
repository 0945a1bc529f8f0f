// Command-line front end: featurize, train, eval, predict, stats, ablate,
// sweep, and gradcheck over the hmfnet library. All subcommands are
// deterministic under a fixed seed; HMFNET_SEED overrides the config seed.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hmfnet/checkpoint.hpp"
#include "hmfnet/config.hpp"
#include "hmfnet/data.hpp"
#include "hmfnet/featurize.hpp"
#include "hmfnet/gradcheck.hpp"
#include "hmfnet/metrics.hpp"
#include "hmfnet/model.hpp"
#include "hmfnet/train.hpp"

using json = nlohmann::json;
using namespace hmfnet;

namespace {

RunConfig load_config_or_default(const std::string &path) {
  if (path.empty())
    return run_config_from_json(json::object());
  return load_run_config(path);
}

LabeledDataset dataset_for(const RunConfig &cfg) {
  if (!cfg.data_path.empty())
    return load_csv(cfg.data_path);
  return synthetic_dataset(cfg.synthetic_molecules, cfg.synthetic_labels,
                           cfg.seed);
}

json model_meta(const TrainResult &result, const RunConfig &cfg,
                const std::vector<std::string> &label_vocab) {
  json meta;
  meta["config"] = run_config_to_json(cfg);
  meta["num_labels"] = result.model.num_labels;
  meta["labels"] = label_vocab;
  meta["token_vocab"] = result.vocab.tokens;
  meta["best_epoch"] = result.best_epoch;
  meta["best_val_f1"] = result.best_val_f1;
  return meta;
}

struct LoadedModel {
  ParamStore params;
  ModelConfig model;
  TokenVocab vocab;
  std::vector<std::string> labels;
  RunConfig cfg;
};

LoadedModel load_model(const std::string &checkpoint_path) {
  LoadedModel lm;
  lm.params = load_checkpoint(checkpoint_path);
  std::ifstream meta_in(checkpoint_path + ".meta.json");
  if (!meta_in)
    throw CheckpointError("missing sidecar " + checkpoint_path +
                          ".meta.json");
  json meta;
  meta_in >> meta;
  lm.cfg = run_config_from_json(meta.at("config"));
  lm.model = lm.cfg.model;
  lm.model.num_labels = meta.at("num_labels").get<int>();
  lm.labels = meta.at("labels").get<std::vector<std::string>>();
  auto tokens = meta.at("token_vocab").get<std::vector<std::string>>();
  for (std::size_t i = 1; i < tokens.size(); ++i)  // slot 0 is UNK
    lm.vocab.add(tokens[i]);
  lm.model.vocab_size = lm.vocab.size();
  return lm;
}

// Builds a label matrix against a fixed vocabulary; labels that are not in
// the vocabulary are counted, not fatal.
Tensor labels_against_vocab(const LabeledDataset &ds,
                            const std::vector<std::string> &vocab,
                            long &unknown) {
  std::map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < vocab.size(); ++j)
    index[vocab[j]] = j;
  Tensor y({ds.size(), vocab.size()}, 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (int id : ds.label_ids[i]) {
      auto it = index.find(ds.vocab[id]);
      if (it == index.end())
        ++unknown;
      else
        y.at(i, it->second) = 1.0;
    }
  return y;
}

json report_to_json(const EvalReport &report) {
  json per_class = json::array();
  for (const auto &pc : report.per_class) {
    json row;
    row["label"] = pc.label;
    row["precision"] = pc.precision;
    row["recall"] = pc.recall;
    row["f1"] = pc.f1;
    if (pc.auroc_evaluable)
      row["auroc"] = pc.auroc;
    row["support"] = pc.support;
    per_class.push_back(row);
  }
  return json{{"macro_f1", report.macro_f1},
              {"auroc", report.auroc},
              {"per_class", per_class}};
}

std::string report_to_csv(const EvalReport &report) {
  std::ostringstream os;
  os << "label,precision,recall,f1,auroc,support\n";
  for (const auto &pc : report.per_class) {
    os << pc.label << ',' << pc.precision << ',' << pc.recall << ',' << pc.f1
       << ',';
    if (pc.auroc_evaluable)
      os << pc.auroc;
    os << ',' << pc.support << "\n";
  }
  return os.str();
}

json loss_report_json(const cil::LossBreakdown &b) {
  return json{{"basis", b.basis},
              {"class", b.cls},
              {"sample", b.sample},
              {"col", b.col},
              {"total", b.total}};
}

void write_text(const std::string &path, const std::string &text) {
  std::ofstream out(path);
  if (!out)
    throw DataError("cannot write " + path);
  out << text;
}

int cmd_featurize(const std::string &input, const std::string &out_path) {
  LabeledDataset ds = load_csv(input);
  std::ofstream out(out_path);
  if (!out)
    throw DataError("cannot write " + out_path);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    MolecularGraph g = parse_smiles(ds.smiles[i]);
    Tensor atoms = atom_features(g);
    Tensor bonds = bond_features(g);
    json row;
    row["smiles"] = ds.smiles[i];
    json atom_rows = json::array();
    for (std::size_t r = 0; r < atoms.rows(); ++r) {
      json one = json::array();
      for (std::size_t c = 0; c < atoms.cols(); ++c)
        one.push_back(atoms.at(r, c));
      atom_rows.push_back(one);
    }
    row["atom_features"] = atom_rows;
    json bond_rows = json::array();
    for (std::size_t r = 0; r < bonds.rows(); ++r) {
      json one = json::array();
      for (std::size_t c = 0; c < bonds.cols(); ++c)
        one.push_back(bonds.at(r, c));
      bond_rows.push_back(one);
    }
    row["bond_features"] = bond_rows;
    row["fp_morgan_hex"] = morgan_fingerprint(g).to_hex();
    row["fp_keys_hex"] = structural_keys(g).to_hex();
    row["fp_topo_hex"] = topological_fingerprint(g).to_hex();
    out << row.dump() << "\n";
  }
  std::cerr << "featurized " << ds.size() << " molecules ("
            << ds.skipped_rows << " rows skipped)\n";
  return 0;
}

int cmd_train(const RunConfig &cfg) {
  LabeledDataset ds = dataset_for(cfg);
  SplitResult splits = split(ds, cfg.fractions, cfg.seed);
  TrainResult result = train_model(splits.train, splits.val, cfg);

  std::filesystem::create_directories(cfg.out_dir);
  std::string ckpt = cfg.out_dir + "/checkpoint.bin";
  save_checkpoint(result.best_params, ckpt);
  write_text(ckpt + ".meta.json",
             model_meta(result, cfg, splits.train.vocab).dump(2) + "\n");

  std::ostringstream log;
  for (const auto &entry : result.log)
    log << entry.line() << "\n";
  write_text(cfg.out_dir + "/metrics.log", log.str());

  std::cout << "trained " << result.epochs_run << " epochs; best val F1 "
            << result.best_val_f1 << " at epoch " << result.best_epoch
            << "\ncheckpoint: " << ckpt << "\n";
  return 0;
}

int cmd_eval(const std::string &checkpoint, const std::string &data,
             bool loss_report, const std::string &csv_out) {
  LoadedModel lm = load_model(checkpoint);
  LabeledDataset ds = load_csv(data);
  long unknown = 0;
  Tensor y = labels_against_vocab(ds, lm.labels, unknown);
  if (unknown > 0)
    std::cerr << "warning: " << unknown
              << " label assignments outside the checkpoint vocabulary\n";

  PreparedData data_prepared;
  data_prepared.labels = y;
  data_prepared.vocab = lm.labels;
  for (const auto &smiles : ds.smiles)
    data_prepared.molecules.push_back(prepare_molecule(
        smiles, lm.vocab, static_cast<std::size_t>(lm.model.max_len)));
  Tensor probs = predict_probs(lm.params, lm.model, data_prepared);
  EvalReport report = evaluate(probs, y, lm.labels);

  json out = report_to_json(report);
  if (loss_report) {
    Tape tape;
    Var pv = tape.leaf(probs);
    cil::ClassWeights weights = cil::class_weights(y);
    cil::EnergyTargets targets = cil::energy_targets(y, lm.cfg.c);
    cil::LossTerms terms =
        batch_loss(pv, y, lm.cfg.loss, weights, targets, lm.cfg.cil_params(),
                   lm.model.ablation.cil);
    out["loss"] = loss_report_json(cil::breakdown(terms));
  }
  std::cout << out.dump(2) << "\n";
  if (!csv_out.empty())
    write_text(csv_out, report_to_csv(report));
  return 0;
}

int cmd_predict(const std::string &checkpoint, const std::string &smiles,
                int top_k) {
  LoadedModel lm = load_model(checkpoint);
  MoleculeInput mi = prepare_molecule(
      smiles, lm.vocab, static_cast<std::size_t>(lm.model.max_len));
  GraphBatch batch = make_batch({&mi});
  Tape tape;
  Binder p(tape, lm.params);
  Prediction pred = hmfnet_forward(p, batch, lm.model);

  std::vector<std::pair<double, std::string>> ranked;
  for (std::size_t j = 0; j < lm.labels.size(); ++j)
    ranked.push_back({pred.probs.val().at(0, j), lm.labels[j]});
  std::sort(ranked.rbegin(), ranked.rend());
  json out;
  out["smiles"] = smiles;
  json preds = json::array();
  for (int k = 0; k < top_k && k < static_cast<int>(ranked.size()); ++k)
    preds.push_back(
        {{"label", ranked[k].second}, {"probability", ranked[k].first}});
  out["predictions"] = preds;
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_stats(const std::string &data, const std::string &json_out,
              const std::string &csv_out) {
  LabeledDataset ds = load_csv(data);
  LabelStats stats = label_stats(ds);

  json out;
  out["molecules"] = ds.size();
  out["skipped_rows"] = ds.skipped_rows;
  out["num_labels"] = ds.num_labels();
  out["total_assignments"] = stats.total_assignments;
  out["long_tail_ratio"] = stats.long_tail_ratio;
  json counts = json::array();
  for (const auto &[label, count] : stats.counts)
    counts.push_back({{"label", label}, {"count", count}});
  out["counts"] = counts;
  out["co_occurrence"] = {{"labels", ds.vocab}};
  json matrix = json::array();
  for (std::size_t i = 0; i < stats.co_occurrence.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < stats.co_occurrence.cols(); ++j)
      row.push_back(static_cast<long>(stats.co_occurrence.at(i, j)));
    matrix.push_back(row);
  }
  out["co_occurrence"]["matrix"] = matrix;

  // The strongest off-diagonal pairs, largest first.
  std::vector<std::tuple<long, std::string, std::string>> pairs;
  for (std::size_t i = 0; i < ds.vocab.size(); ++i)
    for (std::size_t j = i + 1; j < ds.vocab.size(); ++j)
      if (stats.co_occurrence.at(i, j) > 0)
        pairs.push_back({static_cast<long>(stats.co_occurrence.at(i, j)),
                         ds.vocab[i], ds.vocab[j]});
  std::sort(pairs.rbegin(), pairs.rend());
  json top = json::array();
  for (std::size_t k = 0; k < pairs.size() && k < 20; ++k)
    top.push_back({{"labels", {std::get<1>(pairs[k]), std::get<2>(pairs[k])}},
                   {"count", std::get<0>(pairs[k])}});
  out["top_pairs"] = top;

  std::cout << out.dump(2) << "\n";
  if (!json_out.empty())
    write_text(json_out, out.dump(2) + "\n");
  if (!csv_out.empty()) {
    std::ostringstream csv;
    csv << "label,count\n";
    for (const auto &[label, count] : stats.counts)
      csv << label << ',' << count << "\n";
    write_text(csv_out, csv.str());
  }
  return 0;
}

int cmd_ablate(const RunConfig &cfg, const std::string &out_path) {
  LabeledDataset ds = dataset_for(cfg);
  auto rows = run_ablation_table(ds, cfg);
  std::string csv = ablation_csv(rows);
  std::cout << csv;
  if (!out_path.empty())
    write_text(out_path, csv);
  return 0;
}

int cmd_sweep(const RunConfig &cfg, const std::string &param,
              const std::string &out_path) {
  LabeledDataset ds = dataset_for(cfg);
  auto rows =
      run_sweep(ds, cfg, param, default_c_grid(), default_lambda_grid());
  std::string csv = sweep_csv(rows);
  std::cout << csv;
  if (!out_path.empty())
    write_text(out_path, csv);
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, int points) {
  gradcheck::Report report = gradcheck::run_suite(seed, points);
  bool ok = true;
  for (const auto &layer : report.layers) {
    bool pass = layer.pass();
    ok = ok && pass;
    std::cout << (pass ? "PASS" : "FAIL") << "  " << layer.name
              << "  max_rel_err " << layer.max_rel_err << "  within_tol "
              << layer.frac_within * 100.0 << "%  checked " << layer.checked;
    if (!pass)
      std::cout << "  worst " << layer.worst_component;
    std::cout << "\n";
  }
  std::cout << (ok ? "gradcheck passed" : "gradcheck FAILED") << " in "
            << report.seconds << "s\n";
  return ok ? 0 : 1;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"molecular odor prediction toolkit"};
  app.require_subcommand(1);

  // featurize
  auto *featurize = app.add_subcommand(
      "featurize", "emit per-molecule features as JSON lines");
  std::string feat_input, feat_out = "features.jsonl";
  featurize->add_option("--input", feat_input, "input CSV (smiles,labels)")
      ->required();
  featurize->add_option("--out", feat_out, "output JSONL path");

  // train
  auto *train = app.add_subcommand("train", "train a model");
  std::string train_config, train_out;
  train->add_option("--config", train_config, "run config JSON");
  train->add_option("--out", train_out, "output directory override");

  // eval
  auto *eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_data, eval_csv;
  bool eval_loss_report = false;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval->add_option("--data", eval_data, "evaluation CSV")->required();
  eval->add_flag("--loss-report", eval_loss_report,
                 "include per-component loss values");
  eval->add_option("--per-class-csv", eval_csv, "write per-class CSV here");

  // predict
  auto *predict = app.add_subcommand("predict", "predict odor descriptors");
  std::string pred_ckpt, pred_smiles;
  int pred_topk = 5;
  predict->add_option("--checkpoint", pred_ckpt, "checkpoint path")
      ->required();
  predict->add_option("--smiles", pred_smiles, "molecule SMILES")->required();
  predict->add_option("--top", pred_topk, "how many descriptors to emit");

  // stats
  auto *stats = app.add_subcommand("stats", "dataset label statistics");
  std::string stats_data, stats_json, stats_csv;
  stats->add_option("--data", stats_data, "dataset CSV")->required();
  stats->add_option("--json", stats_json, "also write JSON here");
  stats->add_option("--csv", stats_csv, "also write label counts CSV here");

  // ablate
  auto *ablate = app.add_subcommand(
      "ablate", "run the eight-row component ablation table");
  std::string ablate_config, ablate_out;
  ablate->add_option("--config", ablate_config, "run config JSON");
  ablate->add_option("--out", ablate_out, "write the CSV here");

  // sweep
  auto *sweep = app.add_subcommand("sweep", "hyperparameter sweep");
  std::string sweep_config, sweep_param = "c", sweep_out;
  sweep->add_option("--config", sweep_config, "run config JSON");
  sweep->add_option("--param", sweep_param, "c or lambda")->required();
  sweep->add_option("--out", sweep_out, "write the CSV here");

  // gradcheck
  auto *gradcheck_cmd = app.add_subcommand(
      "gradcheck", "finite-difference gradient verification");
  std::uint64_t gc_seed = 7;
  int gc_points = 5;
  gradcheck_cmd->add_option("--seed", gc_seed, "base seed");
  gradcheck_cmd->add_option("--points", gc_points, "random points per layer");

  CLI11_PARSE(app, argc, argv);

  try {
    if (featurize->parsed())
      return cmd_featurize(feat_input, feat_out);
    if (train->parsed()) {
      RunConfig cfg = load_config_or_default(train_config);
      if (!train_out.empty())
        cfg.out_dir = train_out;
      return cmd_train(cfg);
    }
    if (eval->parsed())
      return cmd_eval(eval_ckpt, eval_data, eval_loss_report, eval_csv);
    if (predict->parsed())
      return cmd_predict(pred_ckpt, pred_smiles, pred_topk);
    if (stats->parsed())
      return cmd_stats(stats_data, stats_json, stats_csv);
    if (ablate->parsed())
      return cmd_ablate(load_config_or_default(ablate_config), ablate_out);
    if (sweep->parsed())
      return cmd_sweep(load_config_or_default(sweep_config), sweep_param,
                       sweep_out);
    if (gradcheck_cmd->parsed())
      return cmd_gradcheck(gc_seed, gc_points);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
