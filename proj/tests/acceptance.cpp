// Acceptance suite: one check per release criterion, one PASS/FAIL line
// each, nonzero exit if anything fails. Where a tolerance appears in a
// check it is pinned here, in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "hmfnet/checkpoint.hpp"
#include "hmfnet/config.hpp"
#include "hmfnet/data.hpp"
#include "hmfnet/featurize.hpp"
#include "hmfnet/gradcheck.hpp"
#include "hmfnet/hmfm.hpp"
#include "hmfnet/metrics.hpp"
#include "hmfnet/model.hpp"
#include "hmfnet/train.hpp"

using namespace hmfnet;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string &what) {
    if (!ok) {
      pass = false;
      if (!detail.empty())
        detail += "; ";
      detail += what;
    }
  }
};

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// --- 1. gradient suite -------------------------------------------------------

Outcome criterion_gradients() {
  Outcome out;
  auto report = gradcheck::run_suite(7, 5);
  for (const auto &layer : report.layers)
    out.require(layer.frac_within >= 0.95 && layer.max_rel_err < 1e-3,
                layer.name + " max_rel_err " +
                    std::to_string(layer.max_rel_err) + " frac " +
                    std::to_string(layer.frac_within));
  out.require(report.seconds < 60.0, "runtime " +
                                         std::to_string(report.seconds) +
                                         "s exceeds 60s");
  out.detail = std::to_string(report.layers.size()) + " layers, " +
               std::to_string(report.seconds) + "s" +
               (out.detail.empty() ? "" : "; " + out.detail);
  return out;
}

// --- 2. harmonic feature-map algebra ------------------------------------------

Outcome criterion_hmfm() {
  Outcome out;
  HmfmConfig config{2, 1.0};
  ParamStore store;
  Xoshiro256 rng(0);
  init_hmfm(store, "hmfm", config, rng);
  for (auto &[name, tensor] : store)
    if (name.find("gamma") == std::string::npos)
      for (double &v : tensor.data)
        v = 0.0;

  // Closed form at zero parameters.
  {
    Tape tape;
    Binder p(tape, store);
    Var x = tape.leaf(Tensor::from_rows({{1.0, 1.0}, {-0.3, 2.0}}));
    HmfmTrace trace = hmfm_forward_trace(p, "hmfm", x, config);
    for (double v : trace.w_imp.val().data)
      out.require(v == 0.5, "w_imp not exactly 0.5");
    Tensor base = base_frequencies(config);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        out.require(trace.m.val().at(i, j) == 0.5 * base.data[j],
                    "m not exactly b/2");
    // Hand-derived vector for x = [1, 1].
    const Tensor &v = trace.x_final.val();
    out.require(std::fabs(v.at(0, 0) - 1.0) < 1e-12, "x_final[0]");
    out.require(std::fabs(v.at(0, 1) - std::cos(std::numbers::pi / 4)) <
                    1e-12,
                "x_final[1]");
    out.require(std::fabs(v.at(0, 2) - 0.0) < 1e-12, "x_final[2]");
    out.require(std::fabs(v.at(0, 3) - std::sin(std::numbers::pi / 4)) <
                    1e-12,
                "x_final[3]");
  }

  // Width, bounds and the unit-circle pairing for random parameters.
  HmfmConfig wide{9, 1.4};
  ParamStore wide_store;
  Xoshiro256 wide_rng(5);
  init_hmfm(wide_store, "hmfm", wide, wide_rng);
  Tape tape;
  Binder p(tape, wide_store);
  Tensor x0({7, 9});
  for (double &v : x0.data)
    v = wide_rng.uniform(-3, 3);
  Var y = hmfm_forward(p, "hmfm", tape.leaf(x0), wide);
  out.require(y.val().shape == std::vector<std::size_t>{7, 18},
              "output width is not 2A");
  for (double v : y.val().data)
    out.require(v >= -1.0 && v <= 1.0, "entry outside [-1,1]");
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 9; ++j) {
      double c = y.val().at(i, j), s = y.val().at(i, 9 + j);
      out.require(std::fabs(c * c + s * s - 1.0) <= 1e-12,
                  "cos^2+sin^2 pairing off");
    }
  if (out.pass)
    out.detail = "closed form exact, pairing within 1e-12";
  return out;
}

// --- 3. chemically-informed loss conformance ------------------------------------

Outcome criterion_cil() {
  Outcome out;

  // Clamp bounds achieved exactly.
  {
    Tensor y({1000, 2}, 0.0);
    y.at(0, 0) = 1.0;  // 1 positive / 999 negatives
    for (std::size_t i = 0; i < 999; ++i)
      y.at(i, 1) = 1.0;  // 999 positives / 1 negative
    auto cw = cil::class_weights(y);
    out.require(cw.w.data[0] == 10.0, "ceiling clamp not exact");
    out.require(cw.w.data[1] == 0.1, "floor clamp not exact");
  }

  // Literal positive hinge is identically zero for c >= 0.
  {
    Xoshiro256 rng(11);
    for (double c : {0.0, 0.2, 1.0, 10.0}) {
      Tensor y({12, 5});
      for (double &v : y.data)
        v = rng.uniform() < 0.4 ? 1.0 : 0.0;
      Tensor probs({12, 5});
      for (double &v : probs.data)
        v = rng.uniform(0.0, 1.0);
      auto targets = cil::energy_targets(y, c);
      for (double &v : targets.m_out.data)
        v = 0.0;  // silence the negative hinge; only the positive term left
      Tape tape;
      Var p = tape.leaf(probs);
      double value =
          cil::class_energy_loss(p, y, targets, cil::ClassMode::Literal)
              .val()
              .item();
      out.require(value == 0.0, "literal positive hinge fired at c=" +
                                    std::to_string(c));
    }
  }

  // Hand example of the energy targets.
  {
    Tensor y = Tensor::from_rows({{1, 1}, {1, 0}});
    auto t = cil::energy_targets(y, 0.2);
    out.require(t.m_in.data[0] == 1.2 && t.m_in.data[1] == 1.1,
                "m_in mismatch");
    out.require(t.m_out.data[0] == 0.0 && t.m_out.data[1] == 0.1,
                "m_out mismatch");
  }

  // Decomposition law and the zero floor of the correlation term.
  {
    Xoshiro256 rng(13);
    Tensor y({9, 4});
    for (double &v : y.data)
      v = rng.uniform() < 0.5 ? 1.0 : 0.0;
    Tensor probs({9, 4});
    for (double &v : probs.data)
      v = rng.uniform(0.03, 0.97);
    auto weights = cil::class_weights(y);
    auto targets = cil::energy_targets(y, 0.2);
    cil::CilParams params;
    Tape tape;
    Var p = tape.leaf(probs);
    auto terms = cil::total_loss(p, y, weights, targets, params);
    auto b = cil::breakdown(terms);
    double recon = params.lambda[0] * b.basis + params.lambda[1] * b.cls +
                   params.lambda[2] * b.sample + params.lambda[3] * b.col;
    out.require(std::fabs(b.total - recon) <= 1e-12,
                "total != lambda-weighted sum");

    Tape t2;
    Var py = t2.leaf(y);
    out.require(cil::label_correlation_loss(py, y).val().item() == 0.0,
                "L_col(Y,Y) != 0");
  }

  // Defaults from the default configuration.
  {
    RunConfig cfg = run_config_from_json(nlohmann::json::object());
    out.require(cfg.c == 0.2, "default c");
    out.require(cfg.lambda == std::array<double, 4>{1.0, 0.2, 0.1, 0.2},
                "default lambda");
  }
  if (out.pass)
    out.detail = "clamps exact, literal hinge vacuous, defaults loaded";
  return out;
}

// --- 4. parser and fingerprint invariance ----------------------------------------

Outcome criterion_invariance() {
  Outcome out;
  double t0 = now_seconds();
  int molecules = 0;
  for (const auto &entry : testutil::corpus()) {
    auto g0 = parse_smiles(entry.renderings[0]);
    auto m0 = morgan_fingerprint(g0);
    auto k0 = structural_keys(g0);
    auto p0 = topological_fingerprint(g0);
    ++molecules;
    for (int r = 1; r < 3; ++r) {
      auto g = parse_smiles(entry.renderings[r]);
      out.require(morgan_fingerprint(g) == m0,
                  entry.name + " morgan rendering " + std::to_string(r));
      out.require(structural_keys(g) == k0,
                  entry.name + " keys rendering " + std::to_string(r));
      out.require(topological_fingerprint(g) == p0,
                  entry.name + " topo rendering " + std::to_string(r));
    }
    // Valence-consistent implicit hydrogens on every rendering.
    for (const auto &smiles : entry.renderings) {
      auto g = parse_smiles(smiles);
      for (int i = 0; i < g.num_atoms(); ++i) {
        const Atom &a = g.atoms[i];
        auto allowed = detail::allowed_valences(a.element, a.formal_charge);
        if (allowed.empty())
          continue;
        int total = detail::valence_bond_sum(g, i) + a.implicit_h +
                    a.explicit_h.value_or(0);
        out.require(std::find(allowed.begin(), allowed.end(), total) !=
                        allowed.end(),
                    entry.name + " atom " + std::to_string(i) +
                        " valence-inconsistent");
      }
    }
  }
  double secs = now_seconds() - t0;
  out.require(molecules >= 20, "corpus smaller than 20 molecules");
  out.require(secs < 5.0, "runtime above 5s");
  if (out.pass)
    out.detail = std::to_string(molecules) + " molecules x 3 renderings, " +
                 std::to_string(secs) + "s";
  return out;
}

// --- 5. metric oracle --------------------------------------------------------------

Outcome criterion_metrics() {
  Outcome out;
  Xoshiro256 rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 2 + rng.below(49);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng.below(8)) / 8.0;
      labels[i] = rng.uniform() < 0.5 ? 1 : 0;
      (labels[i] ? has_pos : has_neg) = true;
    }
    if (!has_pos)
      labels[0] = 1;
    if (!has_neg)
      labels[n - 1] = 0;

    double numer = 0.0;
    long n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!labels[i])
        continue;
      ++n_pos;
      for (std::size_t j = 0; j < n; ++j) {
        if (labels[j])
          continue;
        if (scores[i] > scores[j])
          numer += 1.0;
        else if (scores[i] == scores[j])
          numer += 0.5;
      }
    }
    n_neg = static_cast<long>(n) - n_pos;
    double oracle =
        numer / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
    out.require(auroc_binary(scores, labels) == oracle,
                "AUROC differs from oracle on trial " + std::to_string(trial));
  }

  Tensor y = Tensor::from_rows({{1, 0}, {0, 1}, {1, 1}});
  out.require(macro_f1(y, y) == 1.0, "perfect macro F1 != 1");
  Tensor zeros({3, 2}, 0.0);
  out.require(macro_f1(zeros, y) == 0.0, "all-negative macro F1 != 0");
  if (out.pass)
    out.detail = "100 oracle instances exact, trivial F1 cases hold";
  return out;
}

// --- 6. desk-scale learnability -----------------------------------------------------

Outcome criterion_learnability() {
  Outcome out;
  double t0 = now_seconds();

  auto ds = synthetic_dataset(128, 8, 7);
  RunConfig cil_cfg;
  cil_cfg.seed = 7;
  cil_cfg.epochs = 500;
  cil_cfg.early_stop_train_f1 = 0.95;
  auto splits = split(ds, {1.0, 0.0, 0.0}, cil_cfg.seed);
  TrainResult cil_run = train_model(splits.train, splits.val, cil_cfg);
  double cil_f1 = cil_run.log.empty() ? 0.0 : cil_run.log.back().train_f1;
  out.require(cil_f1 >= 0.95, "train macro F1 " + std::to_string(cil_f1) +
                                  " below 0.95 after " +
                                  std::to_string(cil_run.epochs_run) +
                                  " epochs");
  out.require(cil_run.epochs_run <= 500, "epoch budget exceeded");

  // Rarest-label comparison under an identical epoch budget.
  auto rarest_f1 = [&](ParamStore &params, const ModelConfig &model,
                       const TokenVocab &vocab) {
    PreparedData data = prepare_dataset(
        splits.train, vocab, static_cast<std::size_t>(model.max_len));
    Tensor probs = predict_probs(params, model, data);
    auto report = evaluate(probs, data.labels, splits.train.vocab);
    long best_support = 1L << 60;
    double f1 = 0.0;
    for (const auto &pc : report.per_class)
      if (pc.support > 0 && pc.support < best_support) {
        best_support = pc.support;
        f1 = pc.f1;
      }
    return f1;
  };
  double cil_rare = rarest_f1(cil_run.params, cil_run.model, cil_run.vocab);

  RunConfig bce_cfg = cil_cfg;
  bce_cfg.loss = "bce";
  bce_cfg.epochs = cil_run.epochs_run;
  bce_cfg.early_stop_train_f1 = 0.0;
  TrainResult bce_run = train_model(splits.train, splits.val, bce_cfg);
  double bce_rare = rarest_f1(bce_run.params, bce_run.model, bce_run.vocab);
  out.require(bce_rare <= cil_rare,
              "BCE rarest-label F1 " + std::to_string(bce_rare) +
                  " exceeds CIL " + std::to_string(cil_rare));

  double secs = now_seconds() - t0;
  out.require(secs < 120.0, "runtime above 2 minutes");
  if (out.pass)
    out.detail = "F1 " + std::to_string(cil_f1) + " in " +
                 std::to_string(cil_run.epochs_run) + " epochs, " +
                 std::to_string(secs) + "s; rarest-label CIL " +
                 std::to_string(cil_rare) + " vs BCE " +
                 std::to_string(bce_rare);
  return out;
}

// --- 7. ablation harness -------------------------------------------------------------

Outcome criterion_ablation() {
  Outcome out;
  auto rows = ablation_patterns();
  out.require(rows.size() == 8, "not 8 rows");
  const bool expected[8][6] = {
      {1, 0, 0, 0, 0, 0}, {1, 1, 0, 0, 0, 0}, {1, 1, 0, 0, 1, 0},
      {1, 1, 0, 0, 1, 1}, {1, 1, 1, 0, 0, 0}, {1, 1, 1, 1, 0, 0},
      {1, 1, 1, 1, 1, 0}, {1, 1, 1, 1, 1, 1},
  };
  for (std::size_t r = 0; r < rows.size(); ++r) {
    bool match = rows[r].node == expected[r][0] &&
                 rows[r].edge == expected[r][1] &&
                 rows[r].fingerprint == expected[r][2] &&
                 rows[r].token == expected[r][3] &&
                 rows[r].hmfm == expected[r][4] &&
                 rows[r].cil == expected[r][5];
    out.require(match, "row " + std::to_string(r) + " switch pattern");
  }

  auto ds = synthetic_dataset(160, 8, 7);
  RunConfig cfg;
  cfg.seed = 7;
  cfg.epochs = 40;
  cfg.eval_every = 40;
  auto results = run_ablation_table(ds, cfg);
  out.require(results.size() == 8, "harness did not emit 8 rows");
  for (const auto &row : results)
    out.require(std::isfinite(row.f1) && std::isfinite(row.auroc),
                "non-finite metrics");
  out.require(results[7].f1 >= results[0].f1,
              "full config F1 " + std::to_string(results[7].f1) +
                  " below node-only " + std::to_string(results[0].f1));
  if (out.pass)
    out.detail = "8 patterns; full F1 " + std::to_string(results[7].f1) +
                 " >= node-only " + std::to_string(results[0].f1);
  return out;
}

// --- 8. determinism --------------------------------------------------------------------

Outcome criterion_determinism() {
  Outcome out;
  RunConfig cfg;
  cfg.seed = 7;
  cfg.epochs = 5;
  cfg.synthetic_molecules = 64;
  cfg.synthetic_labels = 6;
  auto ds = synthetic_dataset(cfg.synthetic_molecules, cfg.synthetic_labels,
                              cfg.seed);
  auto splits = split(ds, cfg.fractions, cfg.seed);

  TrainResult a = train_model(splits.train, splits.val, cfg);
  TrainResult b = train_model(splits.train, splits.val, cfg);
  out.require(a.log.size() == b.log.size(), "log length differs");
  for (std::size_t i = 0; i < a.log.size() && i < b.log.size(); ++i)
    out.require(a.log[i].line() == b.log[i].line(),
                "metric log line " + std::to_string(i) + " differs");
  std::stringstream bytes_a, bytes_b;
  save_checkpoint(a.best_params, bytes_a);
  save_checkpoint(b.best_params, bytes_b);
  out.require(bytes_a.str() == bytes_b.str(), "checkpoint bytes differ");
  if (out.pass)
    out.detail = "bit-identical logs and checkpoints over " +
                 std::to_string(a.log.size()) + " epochs";
  return out;
}

// --- 9. user-supplied dataset pathway ----------------------------------------------------

Outcome criterion_dataset_pathway() {
  Outcome out;
  // Fabricated data in the documented CSV format, with `fruit` and `green`
  // co-occurring exactly three times.
  std::stringstream csv;
  csv << "smiles,labels\n"
      << "CCO,fruit;green\n"
      << "CC(C)O,fruit;green\n"
      << "CCCO,fruit;green\n"
      << "CCC=O,fruit\n"
      << "CCN,green\n"
      << "c1ccccc1,floral;sweet\n"
      << "Cc1ccccc1,floral\n"
      << "CCOCC,sweet\n"
      << "CC(=O)C,fruit\n"
      << "CCS,sulfurous\n"
      << "C1CCCCC1,green\n"
      << "CC(C)C,sweet\n";
  LabeledDataset ds = load_csv_stream(csv);
  LabelStats stats = label_stats(ds);
  std::size_t fruit = 0, green = 0;
  for (std::size_t j = 0; j < ds.vocab.size(); ++j) {
    if (ds.vocab[j] == "fruit")
      fruit = j;
    if (ds.vocab[j] == "green")
      green = j;
  }
  out.require(stats.co_occurrence.at(fruit, green) == 3.0,
              "fruit/green co-occurrence not reported as 3");

  try {
    RunConfig cfg;
    cfg.seed = 7;
    cfg.epochs = 3;
    cfg.fractions = {0.7, 0.15, 0.15};
    auto splits = split(ds, cfg.fractions, cfg.seed);
    TrainResult tr = train_model(splits.train, splits.val, cfg);
    EvalOutcome ev = evaluate_model(tr.best_params, tr.model, tr.vocab,
                                    splits.train, cfg);
    out.require(std::isfinite(ev.report.macro_f1), "non-finite eval F1");
    out.require(std::isfinite(ev.loss.total), "non-finite eval loss");
  } catch (const std::exception &e) {
    out.require(false, std::string("pipeline raised: ") + e.what());
  }
  if (out.pass)
    out.detail = "stats reports the pair count; train+eval complete";
  return out;
}

} // namespace

int main() {
  struct Criterion {
    const char *name;
    std::function<Outcome()> run;
  };
  std::vector<Criterion> criteria{
      {"gradient suite", criterion_gradients},
      {"harmonic feature-map algebra", criterion_hmfm},
      {"loss conformance", criterion_cil},
      {"parser/fingerprint invariance", criterion_invariance},
      {"metric oracle", criterion_metrics},
      {"desk-scale learnability", criterion_learnability},
      {"ablation harness", criterion_ablation},
      {"determinism", criterion_determinism},
      {"dataset pathway", criterion_dataset_pathway},
  };

  bool all_pass = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome outcome;
    double t0 = now_seconds();
    try {
      outcome = criteria[i].run();
    } catch (const std::exception &e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    double secs = now_seconds() - t0;
    std::printf("%s  criterion %zu: %s (%s) [%.1fs]\n",
                outcome.pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                outcome.detail.c_str(), secs);
    std::fflush(stdout);
    all_pass = all_pass && outcome.pass;
  }
  std::printf("%s\n", all_pass ? "acceptance: all criteria passed"
                               : "acceptance: FAILURES present");
  return all_pass ? 0 : 1;
}
