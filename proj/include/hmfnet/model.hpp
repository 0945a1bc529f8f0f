#pragma once

// HMFNet assembly: the local branch (harmonic feature mapping, node/bond
// encoders, graph attention, pooling), the global branch (fingerprint MLP
// and token-transformer MLP), concatenation fusion, and the multi-label
// classifier head, with the six ablation switches.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hmfnet/featurize.hpp"
#include "hmfnet/hmfm.hpp"
#include "hmfnet/layers.hpp"
#include "hmfnet/params.hpp"
#include "hmfnet/smiles.hpp"
#include "hmfnet/tensor.hpp"

namespace hmfnet {

struct NodeDisabled : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BothBranchesDisabled : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownSwitch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AblationFlags {
  bool node = true;   // must stay on; atom features are the graph substrate
  bool edge = true;
  bool fingerprint = true;
  bool token = true;
  bool hmfm = true;
  bool cil = true;
  bool lmfe = true;  // structural ablation: graph branch as a whole
};

struct ModelConfig {
  int num_labels = 1;
  int hidden = 64;
  int gat_layers = 2;
  int gat_heads = 4;
  int mlp_hidden = 128;
  int embed = 64;
  int atom_dim = kAtomFeatureDim;
  int bond_dim = kBondFeatureDim;
  int fp_dim = kFingerprintDim;
  int vocab_size = 1;   // token ids, UNK included
  int max_len = 64;
  int tok_dim = 64;
  int tok_heads = 4;
  int tok_ffn = 128;
  double hmfm_sigma = 1.0;
  AblationFlags ablation;

  void validate() const {
    if (!ablation.node)
      throw NodeDisabled("atom features cannot be disabled");
    if (num_labels < 1)
      throw std::invalid_argument("num_labels must be >= 1");
    if (hidden % gat_heads != 0)
      throw std::invalid_argument("gat_heads must divide hidden");
    if (tok_dim % tok_heads != 0)
      throw std::invalid_argument("tok_heads must divide tok_dim");
    if (!ablation.lmfe && !ablation.fingerprint && !ablation.token)
      throw BothBranchesDisabled(
          "no active branch: graph branch off and both global branches off");
  }

  TransformerDims transformer_dims() const {
    TransformerDims d;
    d.vocab = static_cast<std::size_t>(vocab_size);
    d.max_len = static_cast<std::size_t>(max_len);
    d.dim = static_cast<std::size_t>(tok_dim);
    d.heads = tok_heads;
    d.ffn = static_cast<std::size_t>(tok_ffn);
    return d;
  }

  // Width of the fused representation entering the classifier head.
  int fusion_width() const {
    int w = 0;
    if (ablation.lmfe)
      w += hidden;
    if (ablation.fingerprint)
      w += embed;
    if (ablation.token)
      w += embed;
    return w;
  }
};

// Table-style switch names; "gmfe" expands to fingerprint+token,
// "lmfe" drops the whole graph branch, "node" is rejected.
inline ModelConfig apply_ablation(ModelConfig config,
                                  const std::vector<std::string> &switches) {
  for (const auto &s : switches) {
    if (s == "node")
      throw NodeDisabled("disabling node features is unsupported");
    else if (s == "edge")
      config.ablation.edge = false;
    else if (s == "fingerprint")
      config.ablation.fingerprint = false;
    else if (s == "token")
      config.ablation.token = false;
    else if (s == "hmfm")
      config.ablation.hmfm = false;
    else if (s == "cil")
      config.ablation.cil = false;
    else if (s == "lmfe")
      config.ablation.lmfe = false;
    else if (s == "gmfe") {
      config.ablation.fingerprint = false;
      config.ablation.token = false;
    } else
      throw UnknownSwitch("unknown ablation switch: " + s);
  }
  return config;
}

// --- batch assembly ---------------------------------------------------------

// Everything derived from one molecule that the network consumes.
struct MoleculeInput {
  Tensor atom_feats;   // N_i x A
  Tensor bond_feats;   // B_i x I
  std::vector<std::pair<int, int>> bonds;  // endpoint atom indices
  Tensor fingerprint;  // [fp_dim]
  std::vector<int> token_ids;
};

inline MoleculeInput prepare_molecule(const MolecularGraph &graph,
                                      const TokenVocab &vocab,
                                      std::size_t max_len = 64) {
  MoleculeInput mi;
  mi.atom_feats = atom_features(graph);
  mi.bond_feats = bond_features(graph);
  for (const Bond &b : graph.bonds)
    mi.bonds.push_back({b.a, b.b});
  mi.fingerprint = molecule_fingerprint(graph);
  mi.token_ids = tokenize_smiles(graph.source, vocab, max_len).ids;
  return mi;
}

inline MoleculeInput prepare_molecule(const std::string &smiles,
                                      const TokenVocab &vocab,
                                      std::size_t max_len = 64) {
  return prepare_molecule(parse_smiles(smiles), vocab, max_len);
}

struct GraphBatch {
  Tensor atom_feats;  // total nodes x A
  Tensor bond_feats;  // total bonds x I
  EdgeList edges;     // directed, self-loops included
  std::vector<std::pair<std::size_t, std::size_t>> node_ranges;  // per graph
  Tensor fingerprints;  // G x fp_dim
  std::vector<std::vector<int>> token_ids;  // per graph
  Tensor labels;        // G x M (all-zero when unknown)

  std::size_t num_graphs() const { return node_ranges.size(); }
};

inline GraphBatch make_batch(const std::vector<const MoleculeInput *> &mols,
                             const Tensor *label_rows = nullptr) {
  if (mols.empty())
    throw EmptyGraph("make_batch: no molecules");
  std::size_t total_nodes = 0, total_bonds = 0;
  for (const auto *m : mols) {
    total_nodes += m->atom_feats.rows();
    total_bonds += m->bond_feats.rows();
  }
  GraphBatch batch;
  batch.atom_feats =
      Tensor({total_nodes, static_cast<std::size_t>(kAtomFeatureDim)});
  batch.bond_feats =
      Tensor({total_bonds, static_cast<std::size_t>(kBondFeatureDim)});
  batch.fingerprints =
      Tensor({mols.size(), static_cast<std::size_t>(kFingerprintDim)});
  batch.edges.num_nodes = total_nodes;
  const int zero_row = static_cast<int>(total_bonds);  // trailing zero pad

  std::size_t node_off = 0, bond_off = 0;
  for (std::size_t gi = 0; gi < mols.size(); ++gi) {
    const MoleculeInput &m = *mols[gi];
    std::size_t n = m.atom_feats.rows(), b = m.bond_feats.rows();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m.atom_feats.cols(); ++j)
        batch.atom_feats.at(node_off + i, j) = m.atom_feats.at(i, j);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < m.bond_feats.cols(); ++j)
        batch.bond_feats.at(bond_off + i, j) = m.bond_feats.at(i, j);
    for (std::size_t j = 0; j < m.fingerprint.numel(); ++j)
      batch.fingerprints.at(gi, j) = m.fingerprint.data[j];

    for (std::size_t i = 0; i < b; ++i) {
      auto [a_idx, b_idx] = m.bonds[i];
      int src = static_cast<int>(node_off) + a_idx;
      int dst = static_cast<int>(node_off) + b_idx;
      int row = static_cast<int>(bond_off + i);
      batch.edges.src.push_back(src);
      batch.edges.dst.push_back(dst);
      batch.edges.bond_row.push_back(row);
      batch.edges.src.push_back(dst);
      batch.edges.dst.push_back(src);
      batch.edges.bond_row.push_back(row);
    }
    for (std::size_t i = 0; i < n; ++i) {
      int v = static_cast<int>(node_off + i);
      batch.edges.src.push_back(v);
      batch.edges.dst.push_back(v);
      batch.edges.bond_row.push_back(zero_row);
    }

    batch.node_ranges.push_back({node_off, node_off + n});
    batch.token_ids.push_back(m.token_ids);
    node_off += n;
    bond_off += b;
  }
  if (label_rows) {
    batch.labels = *label_rows;
  } else {
    batch.labels = Tensor({mols.size(), 1}, 0.0);
  }
  return batch;
}

// --- parameters ----------------------------------------------------------------

inline void init_model(ParamStore &store, const ModelConfig &config,
                       Xoshiro256 &rng) {
  config.validate();
  const auto &f = config.ablation;
  if (f.lmfe) {
    std::size_t node_in = static_cast<std::size_t>(config.atom_dim);
    if (f.hmfm) {
      HmfmConfig hc{config.atom_dim, config.hmfm_sigma};
      init_hmfm(store, "hmfm", hc, rng);
      node_in = 2 * node_in;
    }
    init_linear(store, "node_encoder", node_in,
                static_cast<std::size_t>(config.hidden), rng);
    if (f.edge)
      init_linear(store, "bond_encoder",
                  static_cast<std::size_t>(config.bond_dim),
                  static_cast<std::size_t>(config.hidden), rng);
    for (int layer = 0; layer < config.gat_layers; ++layer)
      init_gat(store, "gat" + std::to_string(layer + 1),
               static_cast<std::size_t>(config.hidden),
               static_cast<std::size_t>(config.hidden),
               static_cast<std::size_t>(config.hidden), config.gat_heads,
               f.edge, rng);
  }
  if (f.fingerprint) {
    init_linear(store, "fp_mlp.l1", static_cast<std::size_t>(config.fp_dim),
                static_cast<std::size_t>(config.mlp_hidden), rng);
    init_linear(store, "fp_mlp.l2",
                static_cast<std::size_t>(config.mlp_hidden),
                static_cast<std::size_t>(config.embed), rng);
  }
  if (f.token) {
    init_transformer(store, "tok", config.transformer_dims(), rng);
    init_linear(store, "tok_mlp.l1", static_cast<std::size_t>(config.tok_dim),
                static_cast<std::size_t>(config.mlp_hidden), rng);
    init_linear(store, "tok_mlp.l2",
                static_cast<std::size_t>(config.mlp_hidden),
                static_cast<std::size_t>(config.embed), rng);
  }
  init_linear(store, "head.l1",
              static_cast<std::size_t>(config.fusion_width()),
              static_cast<std::size_t>(config.mlp_hidden), rng);
  init_linear(store, "head.l2", static_cast<std::size_t>(config.mlp_hidden),
              static_cast<std::size_t>(config.num_labels), rng);
}

// --- forward pass ----------------------------------------------------------------

// Local branch: atom features through the harmonic mapping (when enabled),
// node/bond encoders, the GAT stack, and per-graph mean pooling.
inline Var lmfe_forward(Binder &p, const GraphBatch &batch,
                        const ModelConfig &config) {
  const auto &f = config.ablation;
  Var x = p.tape().leaf(batch.atom_feats);
  if (f.hmfm) {
    HmfmConfig hc{config.atom_dim, config.hmfm_sigma};
    x = hmfm_forward(p, "hmfm", x, hc);
  }
  Var h = linear_relu(p, "node_encoder", x);

  Var edge_enc;
  if (f.edge) {
    Var e = p.tape().leaf(batch.bond_feats);
    Var enc = linear_relu(p, "bond_encoder", e);
    Var zero = p.tape().leaf(
        Tensor({1, static_cast<std::size_t>(config.hidden)}, 0.0));
    edge_enc = ops::concat_rows({enc, zero});
  }

  for (int layer = 0; layer < config.gat_layers; ++layer) {
    h = gat_layer(p, "gat" + std::to_string(layer + 1), h, edge_enc,
                  batch.edges, config.gat_heads, f.edge);
    if (layer + 1 < config.gat_layers)
      h = ops::relu(h);
  }
  return mean_pool(h, batch.node_ranges);
}

// Global branch: fingerprint MLP and/or token-transformer MLP, concatenated.
inline Var gmfe_forward(Binder &p, const GraphBatch &batch,
                        const ModelConfig &config) {
  const auto &f = config.ablation;
  if (!f.fingerprint && !f.token)
    throw BothBranchesDisabled("gmfe_forward: fingerprint and token both off");
  std::vector<Var> parts;
  if (f.fingerprint) {
    Var g = p.tape().leaf(batch.fingerprints);
    parts.push_back(
        linear(p, "fp_mlp.l2", ops::relu(linear(p, "fp_mlp.l1", g))));
  }
  if (f.token) {
    TransformerDims dims = config.transformer_dims();
    std::vector<Var> rows;
    for (const auto &ids : batch.token_ids)
      rows.push_back(transformer_encode(p, "tok", ids, dims));
    Var g = ops::stack_rows(rows);
    parts.push_back(
        linear(p, "tok_mlp.l2", ops::relu(linear(p, "tok_mlp.l1", g))));
  }
  return parts.size() == 1 ? parts[0] : ops::concat_cols(parts);
}

struct Prediction {
  Var logits;
  Var probs;  // sigmoid(logits), strictly inside (0, 1)
};

inline Prediction fuse_and_classify(Binder &p, std::optional<Var> local,
                                    std::optional<Var> global,
                                    const ModelConfig &config) {
  (void)config;
  std::vector<Var> parts;
  if (local)
    parts.push_back(*local);
  if (global)
    parts.push_back(*global);
  if (parts.empty())
    throw BothBranchesDisabled("fuse_and_classify: nothing to fuse");
  Var z = parts.size() == 1 ? parts[0] : ops::concat_cols(parts);
  Var logits = linear(p, "head.l2", ops::relu(linear(p, "head.l1", z)));
  return {logits, ops::sigmoid(logits)};
}

inline Prediction hmfnet_forward(Binder &p, const GraphBatch &batch,
                                 const ModelConfig &config) {
  config.validate();
  const auto &f = config.ablation;
  std::optional<Var> local, global;
  if (f.lmfe)
    local = lmfe_forward(p, batch, config);
  if (f.fingerprint || f.token)
    global = gmfe_forward(p, batch, config);
  return fuse_and_classify(p, local, global, config);
}

} // namespace hmfnet
