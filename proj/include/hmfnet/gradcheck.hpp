#pragma once

// Finite-difference verification of tape gradients. Each layer and each
// loss component is wrapped in a scalar probe (a fixed random weighting of
// its outputs); central differences over the parameter store are compared
// against the recorded gradients.

#include <chrono>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hmfnet/loss.hpp"
#include "hmfnet/model.hpp"
#include "hmfnet/train.hpp"

namespace hmfnet::gradcheck {

struct GradMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LayerReport {
  std::string name;
  double max_rel_err = 0.0;
  double frac_within = 1.0;
  int checked = 0;
  std::string worst_component;

  bool pass(double min_frac = 0.95, double max_tol = 1e-3) const {
    return frac_within >= min_frac && max_rel_err < max_tol;
  }
};

struct Report {
  std::vector<LayerReport> layers;
  double seconds = 0.0;

  bool all_pass() const {
    for (const auto &l : layers)
      if (!l.pass())
        return false;
    return true;
  }
};

inline double relative_error(double analytic, double numeric) {
  double denom =
      std::max({std::fabs(analytic), std::fabs(numeric), 1e-4});
  return std::fabs(analytic - numeric) / denom;
}

// Central differences over every tensor named in `analytic`, subsampled to
// at most `max_components` evenly-strided entries per tensor.
inline LayerReport check_gradients(
    const std::string &name, ParamStore &store,
    const std::function<double()> &forward,
    const std::map<std::string, Tensor> &analytic, double step = 1e-5,
    double tol = 1e-4, std::size_t max_components = SIZE_MAX) {
  LayerReport report;
  report.name = name;
  int within = 0;
  for (const auto &[pname, grad] : analytic) {
    Tensor &param = store.at(pname);
    std::size_t n = param.numel();
    std::size_t stride = 1;
    if (max_components != SIZE_MAX && n > max_components)
      stride = n / max_components;
    for (std::size_t i = 0; i < n; i += stride) {
      double orig = param.data[i];
      param.data[i] = orig + step;
      double fp = forward();
      param.data[i] = orig - step;
      double fm = forward();
      param.data[i] = orig;
      double numeric = (fp - fm) / (2.0 * step);
      double err = relative_error(grad.data[i], numeric);
      if (err > report.max_rel_err) {
        report.max_rel_err = err;
        report.worst_component = pname + "[" + std::to_string(i) + "]";
      }
      if (err < tol)
        ++within;
      ++report.checked;
    }
  }
  report.frac_within =
      report.checked == 0 ? 1.0
                          : static_cast<double>(within) / report.checked;
  return report;
}

namespace suite_detail {

inline Tensor random_tensor(std::vector<std::size_t> shape, Xoshiro256 &rng,
                            double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double &v : t.data)
    v = rng.uniform(lo, hi);
  return t;
}

inline Tensor random_binary(std::vector<std::size_t> shape, Xoshiro256 &rng) {
  Tensor t(std::move(shape));
  for (double &v : t.data)
    v = rng.uniform() < 0.4 ? 1.0 : 0.0;
  return t;
}

// Merge several per-point reports into one row.
inline LayerReport merge(const std::string &name,
                         const std::vector<LayerReport> &parts) {
  LayerReport out;
  out.name = name;
  double within = 0.0;
  for (const auto &p : parts) {
    if (p.max_rel_err > out.max_rel_err) {
      out.max_rel_err = p.max_rel_err;
      out.worst_component = p.worst_component;
    }
    within += p.frac_within * p.checked;
    out.checked += p.checked;
  }
  out.frac_within = out.checked == 0 ? 1.0 : within / out.checked;
  return out;
}

} // namespace suite_detail

// The per-layer and per-loss-component finite-difference suite. `points`
// random parameter draws per case (the acceptance gate runs 5).
inline Report run_suite(std::uint64_t seed = 7, int points = 5) {
  using suite_detail::random_binary;
  using suite_detail::random_tensor;
  auto t_start = std::chrono::steady_clock::now();

  Report report;
  std::map<std::string, std::vector<LayerReport>> buckets;

  for (int point = 0; point < points; ++point) {
    Xoshiro256 rng(seed + 1000003ULL * static_cast<std::uint64_t>(point));

    // -- linear ------------------------------------------------------------
    {
      ParamStore store;
      store.put("input", random_tensor({4, 5}, rng));
      init_linear(store, "lin", 5, 3, rng);
      // break the zero-bias symmetry so bias gradients are generic
      for (double &v : store.at("lin.bias").data)
        v = rng.uniform(-0.5, 0.5);
      Tensor probe = random_tensor({4, 3}, rng);
      auto build = [&](Binder &p) {
        return ops::sum_all(ops::cmul(linear(p, "lin", p("input")), probe));
      };
      auto forward = [&]() {
        Tape tape;
        Binder p(tape, store);
        return build(p).val().item();
      };
      Tape tape;
      Binder p(tape, store);
      Var loss = build(p);
      tape.backward(loss);
      buckets["linear"].push_back(
          check_gradients("linear", store, forward, p.gradients()));
    }

    // -- layer_norm ----------------------------------------------------------
    {
      ParamStore store;
      store.put("input", random_tensor({4, 6}, rng));
      init_layer_norm(store, "ln", 6);
      for (double &v : store.at("ln.gamma").data)
        v = rng.uniform(0.5, 1.5);
      for (double &v : store.at("ln.beta").data)
        v = rng.uniform(-0.5, 0.5);
      Tensor probe = random_tensor({4, 6}, rng);
      auto build = [&](Binder &p) {
        return ops::sum_all(
            ops::cmul(layer_norm(p, "ln", p("input")), probe));
      };
      auto forward = [&]() {
        Tape tape;
        Binder p(tape, store);
        return build(p).val().item();
      };
      Tape tape;
      Binder p(tape, store);
      tape.backward(build(p));
      buckets["layer_norm"].push_back(
          check_gradients("layer_norm", store, forward, p.gradients()));
    }

    // -- graph attention over a real two-molecule batch ----------------------
    {
      TokenVocab vocab = build_token_vocab({"CCO", "C1CC1"});
      std::vector<MoleculeInput> mols{prepare_molecule("CCO", vocab),
                                      prepare_molecule("C1CC1", vocab)};
      GraphBatch batch = make_batch({&mols[0], &mols[1]});

      ParamStore store;
      init_linear(store, "node_encoder", kAtomFeatureDim, 8, rng);
      init_linear(store, "bond_encoder", kBondFeatureDim, 8, rng);
      init_gat(store, "gat1", 8, 8, 8, 2, true, rng);
      Tensor probe = random_tensor({batch.edges.num_nodes, 8}, rng);
      auto build = [&](Binder &p) {
        Var h = linear_relu(p, "node_encoder", p.tape().leaf(batch.atom_feats));
        Var enc =
            linear_relu(p, "bond_encoder", p.tape().leaf(batch.bond_feats));
        Var zero = p.tape().leaf(Tensor({1, 8}, 0.0));
        Var edge_enc = ops::concat_rows({enc, zero});
        Var out = gat_layer(p, "gat1", h, edge_enc, batch.edges, 2, true);
        return ops::sum_all(ops::cmul(out, probe));
      };
      auto forward = [&]() {
        Tape tape;
        Binder p(tape, store);
        return build(p).val().item();
      };
      Tape tape;
      Binder p(tape, store);
      tape.backward(build(p));
      buckets["gat"].push_back(
          check_gradients("gat", store, forward, p.gradients()));
    }

    // -- mean pooling ----------------------------------------------------------
    {
      ParamStore store;
      store.put("input", random_tensor({6, 4}, rng));
      std::vector<std::pair<std::size_t, std::size_t>> ranges{{0, 4}, {4, 6}};
      Tensor probe = random_tensor({2, 4}, rng);
      auto build = [&](Binder &p) {
        return ops::sum_all(ops::cmul(mean_pool(p("input"), ranges), probe));
      };
      auto forward = [&]() {
        Tape tape;
        Binder p(tape, store);
        return build(p).val().item();
      };
      Tape tape;
      Binder p(tape, store);
      tape.backward(build(p));
      buckets["mean_pool"].push_back(
          check_gradients("mean_pool", store, forward, p.gradients()));
    }

    // -- transformer block -------------------------------------------------------
    {
      TransformerDims dims;
      dims.vocab = 6;
      dims.max_len = 8;
      dims.dim = 8;
      dims.heads = 2;
      dims.ffn = 12;
      ParamStore store;
      init_transformer(store, "tok", dims, rng);
      std::vector<int> ids{1, 2, 3, 4, 0};
      Tensor probe = random_tensor({8}, rng);
      auto build = [&](Binder &p) {
        return ops::sum_all(
            ops::cmul(transformer_encode(p, "tok", ids, dims), probe));
      };
      auto forward = [&]() {
        Tape tape;
        Binder p(tape, store);
        return build(p).val().item();
      };
      Tape tape;
      Binder p(tape, store);
      tape.backward(build(p));
      buckets["transformer"].push_back(
          check_gradients("transformer", store, forward, p.gradients()));
    }

    // -- harmonic modulated feature mapping -----------------------------------------
    {
      HmfmConfig hc{5, 1.0};
      ParamStore store;
      store.put("input", random_tensor({3, 5}, rng));
      init_hmfm(store, "hmfm", hc, rng);
      Tensor probe = random_tensor({3, 10}, rng);
      auto build = [&](Binder &p) {
        return ops::sum_all(
            ops::cmul(hmfm_forward(p, "hmfm", p("input"), hc), probe));
      };
      auto forward = [&]() {
        Tape tape;
        Binder p(tape, store);
        return build(p).val().item();
      };
      Tape tape;
      Binder p(tape, store);
      tape.backward(build(p));
      buckets["hmfm"].push_back(
          check_gradients("hmfm", store, forward, p.gradients()));
    }

    // -- loss components w.r.t. predictions ----------------------------------------
    {
      ParamStore store;
      store.put("probs", random_tensor({5, 4}, rng, 0.05, 0.95));
      Tensor labels = random_binary({5, 4}, rng);
      cil::ClassWeights weights = cil::class_weights(labels);
      cil::EnergyTargets targets = cil::energy_targets(labels, 0.2);
      cil::CilParams params;

      struct Component {
        std::string name;
        std::function<Var(Var)> loss;
      };
      std::vector<Component> components{
          {"cil.weighted_bce",
           [&](Var p) { return cil::weighted_bce(p, labels, weights.w); }},
          {"cil.class_energy.corrected",
           [&](Var p) {
             return cil::class_energy_loss(p, labels, targets,
                                           cil::ClassMode::Corrected);
           }},
          {"cil.class_energy.literal",
           [&](Var p) {
             return cil::class_energy_loss(p, labels, targets,
                                           cil::ClassMode::Literal);
           }},
          {"cil.sample",
           [&](Var p) { return cil::sample_loss(p, labels, 0.5, 0.5); }},
          {"cil.label_correlation",
           [&](Var p) { return cil::label_correlation_loss(p, labels); }},
          {"cil.total",
           [&](Var p) {
             return cil::total_loss(p, labels, weights, targets, params).total;
           }},
      };
      for (const auto &component : components) {
        auto forward = [&]() {
          Tape tape;
          Binder p(tape, store);
          return component.loss(p("probs")).val().item();
        };
        Tape tape;
        Binder p(tape, store);
        tape.backward(component.loss(p("probs")));
        buckets[component.name].push_back(
            check_gradients(component.name, store, forward, p.gradients()));
      }
    }

    // -- fully composed model with the total loss -----------------------------------
    {
      std::vector<std::string> smiles{"CCO", "C=O", "c1ccccc1"};
      TokenVocab vocab = build_token_vocab(smiles);
      ModelConfig config;
      config.num_labels = 3;
      config.hidden = 8;
      config.gat_layers = 2;
      config.gat_heads = 2;
      config.mlp_hidden = 8;
      config.embed = 8;
      config.vocab_size = vocab.size();
      config.max_len = 16;
      config.tok_dim = 8;
      config.tok_heads = 2;
      config.tok_ffn = 8;

      std::vector<MoleculeInput> mols;
      for (const auto &s : smiles)
        mols.push_back(prepare_molecule(s, vocab, 16));
      Tensor labels = random_binary({3, 3}, rng);
      GraphBatch batch =
          make_batch({&mols[0], &mols[1], &mols[2]}, &labels);

      ParamStore store;
      Xoshiro256 init_rng(seed + 77ULL * point);
      init_model(store, config, init_rng);
      cil::ClassWeights weights = cil::class_weights(labels);
      cil::EnergyTargets targets = cil::energy_targets(labels, 0.2);
      cil::CilParams params;

      auto build = [&](Binder &p) {
        Prediction pred = hmfnet_forward(p, batch, config);
        return cil::total_loss(pred.probs, labels, weights, targets, params)
            .total;
      };
      auto forward = [&]() {
        Tape tape;
        Binder p(tape, store);
        return build(p).val().item();
      };
      Tape tape;
      Binder p(tape, store);
      tape.backward(build(p));
      buckets["full_model_cil"].push_back(check_gradients(
          "full_model_cil", store, forward, p.gradients(), 1e-5, 1e-4, 24));
    }
  }

  for (const auto &[name, parts] : buckets)
    report.layers.push_back(suite_detail::merge(name, parts));

  auto t_stop = std::chrono::steady_clock::now();
  report.seconds =
      std::chrono::duration<double>(t_stop - t_start).count();
  return report;
}

} // namespace hmfnet::gradcheck
