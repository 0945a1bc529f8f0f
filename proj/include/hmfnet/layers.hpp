#pragma once

// Neural layers composed from tape ops: linear, graph attention with edge
// features in the attention logit, segment pooling, and a one-block
// transformer encoder for token sequences.

#include <string>
#include <vector>

#include "hmfnet/params.hpp"
#include "hmfnet/tensor.hpp"

namespace hmfnet {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kGatLeakySlope = 0.2;

inline Var linear(Binder &p, const std::string &prefix, Var x) {
  return ops::add_bias(ops::matmul(x, p(prefix + ".weight")),
                       p(prefix + ".bias"));
}

inline Var linear_relu(Binder &p, const std::string &prefix, Var x) {
  return ops::relu(linear(p, prefix, x));
}

inline Var layer_norm(Binder &p, const std::string &prefix, Var x,
                      double eps = kLayerNormEps) {
  return ops::layer_norm(x, p(prefix + ".gamma"), p(prefix + ".beta"), eps);
}

// Directed message-passing edges over a node block, self-loops included.
// `bond_row` indexes into the encoded bond-feature matrix; self-loops point
// at a trailing all-zero row.
struct EdgeList {
  std::vector<int> src;
  std::vector<int> dst;
  std::vector<int> bond_row;
  std::size_t num_nodes = 0;
};

// Graph attention layer: per head,
//   logit(i<-j) = leaky_relu(a^T [W h_i || W h_j || W_e e_ij]),
// softmax over each destination's in-neighborhood, output the concatenation
// over heads of the attention-weighted sums of W h_j.
inline Var gat_layer(Binder &p, const std::string &prefix, Var h,
                     Var edge_enc, const EdgeList &edges, int heads,
                     bool use_edges) {
  if (edges.num_nodes == 0)
    throw EmptyGraph("gat_layer: no nodes");
  std::size_t out_dim = p(prefix + ".W").val().shape[1];
  if (out_dim % static_cast<std::size_t>(heads) != 0)
    throw ShapeMismatch("gat_layer: head count must divide output width");
  std::size_t dh = out_dim / heads;

  Var hw = ops::matmul(h, p(prefix + ".W"));
  Var hw_dst = ops::gather_rows(hw, edges.dst);
  Var hw_src = ops::gather_rows(hw, edges.src);
  Var ew;
  if (use_edges) {
    Var ew_all = ops::matmul(edge_enc, p(prefix + ".We"));
    ew = ops::gather_rows(ew_all, edges.bond_row);
  }

  Var attn_vec = p(prefix + ".a");  // [(2 or 3)*dh x heads]
  std::vector<Var> per_head;
  for (int head = 0; head < heads; ++head) {
    std::size_t lo = head * dh, hi = (head + 1) * dh;
    std::vector<Var> cat_parts{ops::slice_cols(hw_dst, lo, hi),
                               ops::slice_cols(hw_src, lo, hi)};
    if (use_edges)
      cat_parts.push_back(ops::slice_cols(ew, lo, hi));
    Var cat = ops::concat_cols(cat_parts);
    Var a_col = ops::slice_cols(attn_vec, head, head + 1);
    Var logits = ops::leaky_relu(ops::matmul(cat, a_col), kGatLeakySlope);
    Var flat = ops::reshape(logits, {logits.val().shape[0]});
    Var alpha = ops::segment_softmax(flat, edges.dst, edges.num_nodes);
    Var msg = ops::slice_cols(hw_src, lo, hi);
    per_head.push_back(
        ops::segment_weighted_sum(alpha, msg, edges.dst, edges.num_nodes));
  }
  return ops::concat_cols(per_head);
}

inline void init_gat(ParamStore &store, const std::string &prefix,
                     std::size_t in_dim, std::size_t out_dim,
                     std::size_t edge_dim, int heads, bool use_edges,
                     Xoshiro256 &rng) {
  store.put(prefix + ".W", uniform_weights(in_dim, out_dim, rng));
  if (use_edges)
    store.put(prefix + ".We", uniform_weights(edge_dim, out_dim, rng));
  std::size_t dh = out_dim / heads;
  std::size_t a_rows = (use_edges ? 3 : 2) * dh;
  store.put(prefix + ".a",
            uniform_weights(a_rows, static_cast<std::size_t>(heads), rng));
}

// Mean pool of node rows into per-graph rows.
inline Var mean_pool(Var h,
                     const std::vector<std::pair<std::size_t, std::size_t>>
                         &graph_ranges) {
  return ops::segment_mean(h, graph_ranges);
}

struct TransformerDims {
  std::size_t vocab = 1;    // token ids below this, UNK included
  std::size_t max_len = 64;
  std::size_t dim = 64;
  int heads = 4;
  std::size_t ffn = 128;
};

struct TokenOutOfVocab : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void init_transformer(ParamStore &store, const std::string &prefix,
                             const TransformerDims &dims, Xoshiro256 &rng) {
  store.put(prefix + ".embedding",
            uniform_weights(dims.vocab, dims.dim, rng));
  store.put(prefix + ".positional",
            uniform_weights(dims.max_len, dims.dim, rng));
  init_linear(store, prefix + ".wq", dims.dim, dims.dim, rng);
  init_linear(store, prefix + ".wk", dims.dim, dims.dim, rng);
  init_linear(store, prefix + ".wv", dims.dim, dims.dim, rng);
  init_linear(store, prefix + ".wo", dims.dim, dims.dim, rng);
  init_layer_norm(store, prefix + ".norm1", dims.dim);
  init_linear(store, prefix + ".ffn1", dims.dim, dims.ffn, rng);
  init_linear(store, prefix + ".ffn2", dims.ffn, dims.dim, rng);
  init_layer_norm(store, prefix + ".norm2", dims.dim);
}

// One pre-assembled encoder block over a single unpadded sequence:
// token + positional embedding, multi-head self-attention with residual and
// layer norm, two-layer feedforward with residual and layer norm, mean pool
// over positions. Returns a [dim] vector.
inline Var transformer_encode(Binder &p, const std::string &prefix,
                              const std::vector<int> &token_ids,
                              const TransformerDims &dims) {
  if (token_ids.empty())
    throw EmptyGraph("transformer_encode: empty token sequence");
  std::size_t len = std::min<std::size_t>(token_ids.size(), dims.max_len);
  std::vector<int> ids(token_ids.begin(), token_ids.begin() + len);
  std::vector<int> positions(len);
  for (std::size_t i = 0; i < len; ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= dims.vocab)
      throw TokenOutOfVocab("token id " + std::to_string(ids[i]) +
                            " outside vocabulary of " +
                            std::to_string(dims.vocab));
    positions[i] = static_cast<int>(i);
  }

  Var x = ops::add(ops::gather_rows(p(prefix + ".embedding"), ids),
                   ops::gather_rows(p(prefix + ".positional"), positions));

  std::size_t dh = dims.dim / dims.heads;
  Var q = linear(p, prefix + ".wq", x);
  Var k = linear(p, prefix + ".wk", x);
  Var v = linear(p, prefix + ".wv", x);
  std::vector<Var> ctx;
  double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int head = 0; head < dims.heads; ++head) {
    std::size_t lo = head * dh, hi = (head + 1) * dh;
    Var qh = ops::slice_cols(q, lo, hi);
    Var kh = ops::slice_cols(k, lo, hi);
    Var vh = ops::slice_cols(v, lo, hi);
    Var scores = ops::affine(ops::matmul(qh, ops::transpose(kh)), scale, 0.0);
    Var attn = ops::softmax_rows(scores);
    ctx.push_back(ops::matmul(attn, vh));
  }
  Var attn_out = linear(p, prefix + ".wo", ops::concat_cols(ctx));
  Var x1 = layer_norm(p, prefix + ".norm1", ops::add(x, attn_out));
  Var ffn = linear(p, prefix + ".ffn2",
                   ops::relu(linear(p, prefix + ".ffn1", x1)));
  Var x2 = layer_norm(p, prefix + ".norm2", ops::add(x1, ffn));
  Var pooled = ops::affine(ops::col_sums(x2),
                           1.0 / static_cast<double>(len), 0.0);
  return pooled;
}

} // namespace hmfnet
